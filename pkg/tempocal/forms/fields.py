from typing import Any, Callable, Optional

from .validators import Validator, ValidationError, StopValidation

__all__ = [
    'FormEntry',
    'Input',
]


class FormEntry:
    def __init__(self, identifier: str = None):
        self.id = identifier

    def clear(self) -> None:
        pass

    def fill(self, value: Any) -> None:
        pass

    def validate(self) -> bool:
        return True

    @property
    def errors(self) -> list[str]:
        return []


class Input(FormEntry):
    """
    One configuration value. Validators run in order and a StopValidation
    ends the chain; `cast` converts the value (or the default) once it
    validated.
    """

    def __init__(self,
        label: str,
        validators: Optional[list[Validator]] = None,
        identifier: str = None,
        default: Any = None,
        cast: Optional[Callable[[Any], Any]] = None
    ):
        super().__init__(identifier)

        self.label: str = label
        self.validators: list[Validator] = validators or []
        self.default: Any = default
        self.cast: Optional[Callable[[Any], Any]] = cast

        self._value: Any = None
        self._errors: list[str] = []

    def clear(self) -> None:
        self._value = None
        self._errors = []

    def fill(self, value: Any) -> None:
        self._value = value

    def validate(self) -> bool:
        self._errors = []

        for validator in self.validators:
            try:
                validator(self)

            except ValidationError as err:
                self._errors.append(str(err))

            except StopValidation as err:
                if str(err):
                    self._errors.append(str(err))
                break

        return not self._errors

    @property
    def raw(self) -> Any:
        return self.default if self._value is None else self._value

    @property
    def value(self) -> Any:
        value = self.raw
        if value is None or self.cast is None or self._errors:
            return value
        return self.cast(value)

    @property
    def errors(self) -> list[str]:
        return self._errors
