__all__ = [
    'wrap_async',
    'md5',
    'md5_sync',
    'mkpath',
    'mkpath_sync',
    'text_digest',
]

import os
import asyncio
import functools
import pathlib
from collections.abc import Awaitable, Callable
from hashlib import md5 as _md5
from typing import TypeVar, ParamSpec


def md5_sync(filename: str | bytes | os.PathLike) -> str:
    digest = _md5()
    with open(filename, 'rb') as f:
        for chunk in iter(lambda: f.read(65536), b''):
            digest.update(chunk)
    return digest.hexdigest()

def mkpath_sync(path: str | bytes | os.PathLike) -> None:
    pathlib.Path(path).mkdir(parents=True, exist_ok=True)

def text_digest(text: str) -> str:
    return _md5(text.encode()).hexdigest()


P = ParamSpec('P')
R = TypeVar('R')
def wrap_async(func: Callable[P, R]) -> Callable[P, Awaitable[R]]:
    @functools.wraps(func)
    async def run_async(*args: P.args, **kwargs: P.kwargs) -> R:
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(None, functools.partial(func, *args, **kwargs))

    return run_async


md5 = wrap_async(md5_sync)
mkpath = wrap_async(mkpath_sync)
