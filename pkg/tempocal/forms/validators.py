from pathlib import Path
from typing import Optional, Protocol


class ValidationError(ValueError):
    pass

class StopValidation(Exception):
    pass


class Validator(Protocol):
    def __call__(self, entry: 'FormEntry') -> None:
        ...

class required(Validator):
    def __init__(self, message: Optional[str] = None):
        self.message: str
        if message is None:
            self.message = 'this field is required'
        else:
            self.message = message

    def __call__(self, field: 'FormEntry'):
        if field.raw is None or (isinstance(field.raw, str) and not field.raw.strip()):
            raise StopValidation(self.message)

class optional(Validator):
    """Stops the chain quietly when the field is empty."""

    def __call__(self, field: 'FormEntry'):
        if field.raw is None:
            raise StopValidation()

class number(Validator):
    def __init__(self,
        min: Optional[float] = None,
        max: Optional[float] = None,
        exclusive_min: bool = False,
        integer: bool = False
    ):
        self.min = min
        self.max = max
        self.exclusive_min = exclusive_min
        self.integer = integer

    def __call__(self, field: 'FormEntry'):
        value = field.raw
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise StopValidation(f'expected a number, got {value!r}')

        if self.integer and int(value) != value:
            raise ValidationError(f'expected an integer, got {value}')

        if self.min is not None:
            if self.exclusive_min and not value > self.min:
                raise ValidationError(f'must be greater than {self.min:g}')
            if not self.exclusive_min and value < self.min:
                raise ValidationError(f'must be at least {self.min:g}')

        if self.max is not None and value > self.max:
            raise ValidationError(f'must be at most {self.max:g}')

class range_pair(Validator):
    """A [lo, hi] list with lo < hi."""

    def __call__(self, field: 'FormEntry'):
        value = field.raw
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise StopValidation(f'expected [lo, hi], got {value!r}')

        lo, hi = value
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
            raise StopValidation(f'expected two numbers, got {value!r}')

        if not lo < hi:
            raise ValidationError(f'lo must be smaller than hi, got [{lo:g}, {hi:g}]')

class path_exists(Validator):
    def __init__(self, base: Optional[Path] = None):
        self.base = base

    def __call__(self, field: 'FormEntry'):
        path = Path(field.raw)
        if self.base is not None and not path.is_absolute():
            path = self.base / path

        if not path.exists():
            raise ValidationError(f'{path} does not exist')

class members_of(Validator):
    """A non-empty list (or comma separated string) drawn from `choices`."""

    def __init__(self, choices: list[str]):
        self.choices = choices

    def __call__(self, field: 'FormEntry'):
        values = field.raw
        if isinstance(values, str):
            values = [v for v in values.split(',') if v.strip()]

        if not isinstance(values, (list, tuple)) or not values:
            raise StopValidation('expected a non-empty list')

        unknown = [v for v in values if str(v).strip().lower() not in self.choices]
        if unknown:
            raise ValidationError(f'unknown values: {", ".join(map(str, unknown))}')
