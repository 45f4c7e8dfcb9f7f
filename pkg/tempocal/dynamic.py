import json
import os
from enum import Enum
from pathlib import Path
from typing import Any

import importlib
import importlib.util
import importlib.machinery

import numpy as np
import pandas as pd

__all__ = [
    'Dynamic',
    'GenericEncoder',
]

class GenericEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, set):
            return sorted(o)

        if isinstance(o, np.ndarray):
            return o.tolist()

        if isinstance(o, np.generic):
            return o.item()

        if isinstance(o, Enum):
            return o.value

        if isinstance(o, (pd.Timestamp, pd.Timedelta)):
            return o.isoformat()

        if isinstance(o, Path):
            return str(o)

        return super().default(o)

class Dynamic(dict):
    def __getattr__(self, name: str) -> Any:
        if name in self:
            val = self[name]
            if isinstance(val, dict) and not isinstance(val, Dynamic):
                val = Dynamic(val)
            return val
        else:
            raise AttributeError(name)

    def __setattr__(self, name: str, value: Any):
        self[name] = value

    def get_path(self, *path: str, default: Any = None) -> Any:
        cur = self
        for sect in path:
            if not isinstance(cur, dict):
                return default
            cur = cur.get(sect)
            if cur is None:
                return default

        if isinstance(cur, dict) and not isinstance(cur, Dynamic):
            cur = Dynamic(cur)
        return cur

    def to_json(self, indent: int | None = None) -> str:
        if indent is None:
            return json.dumps(self, separators=(',', ':'), sort_keys=True, cls=GenericEncoder)
        return json.dumps(self, indent=indent, sort_keys=True, cls=GenericEncoder)

    def to_file(self, filename: str | os.PathLike) -> None:
        with open(filename, 'w+') as json_file:
            json_file.write(self.to_json(indent=2))
            json_file.write('\n')

    @classmethod
    def from_module(cls, filename: str | os.PathLike) -> Any:
        module_name = '_tempocal_config.' + Path(filename).name.split('.')[0]
        loader = importlib.machinery.SourceFileLoader(module_name, str(filename))
        spec = importlib.util.spec_from_loader(module_name, loader)
        module = importlib.util.module_from_spec(spec)
        loader.exec_module(module)

        return cls((k, getattr(module, k)) for k in dir(module) if not k.startswith('_'))

    @classmethod
    def from_json(cls, json_string: str | bytes | None) -> Any:
        if json_string is None:
            return cls()

        return json.loads(json_string, object_hook=cls)

    @classmethod
    def from_file(cls, filename: str | os.PathLike) -> Any:
        with open(filename) as json_file:
            s = json.load(json_file, object_hook=cls)

        if not isinstance(s, cls):
            raise ValueError('json file is not an object')

        return s
