import contextlib
import logging
import os
from collections.abc import Awaitable, Callable
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import pandas as pd
from natsort import natsorted

from ._version import __version__
from .dynamic import Dynamic
from .util import md5, mkpath, text_digest, wrap_async

__all__ = [
    'RunSession',
    'MANIFEST_FILENAME',
    'announce',
]

MANIFEST_FILENAME = 'manifest.json'


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, lineterminator='\n')


async def announce(session: 'RunSession', committed: bool) -> None:
    """Commit and rollback callback reporting where the run ended up."""

    manifest = session.manifest
    if committed:
        session.log.info('%s written to %s (%d artifacts, digest %s)', manifest.kind, session.directory,
                         len(manifest.get('artifacts') or {}), manifest.get('digest'))
    else:
        session.log.error('%s in %s failed after %d artifacts: %s', manifest.kind, session.directory,
                          len(manifest.get('artifacts') or {}), manifest.get('error'))


class RunSession:
    """
    A result directory being written. Artifacts are recorded as they are
    written; on exit the manifest is written with their md5 digests and
    status `complete`, or `failed` if the block raised.
    Volatile artifacts (wall-clock timings) are listed but left out of the
    combined digest.
    """

    def __init__(self, directory: str | os.PathLike, kind: str, settings: Optional[dict[str, Any]] = None):
        self.directory: Path = Path(directory)
        self.log: logging.Logger = logging.getLogger(f'tempocal.session.{kind}')
        self.manifest: Dynamic = Dynamic({
            'kind': kind,
            'version': __version__,
            'status': 'running',
            'settings': Dynamic(settings or {}),
        })

        self._artifacts: dict[str, bool] = {}
        self._callbacks: list[tuple[Callable[['RunSession', bool], Awaitable], bool, bool]] = []

    async def __aenter__(self):
        await mkpath(self.directory)
        return self

    async def __aexit__(self, exc_type, exc, tb):
        if exc is None:
            await self.commit()

        else:
            self.manifest.error = f'{type(exc).__name__}: {exc}'
            await self.rollback()

        return False

    def callback(self,
        callback: Callable[['RunSession', bool], Awaitable],
        on_commit: bool = False,
        on_rollback: bool = False
    ):
        self._callbacks.append((callback, on_commit, on_rollback))

    def path(self, *parts: str) -> Path:
        path = self.directory.joinpath(*parts)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def record(self, path: str | os.PathLike, volatile: bool = False) -> None:
        relative = Path(path).resolve().relative_to(self.directory.resolve()).as_posix()
        self._artifacts[relative] = volatile

    async def write_frame(self, name: str, frame: pd.DataFrame, volatile: bool = False) -> Path:
        path = self.path(name)
        await wrap_async(_write_csv)(frame, path)
        self.record(path, volatile)
        return path

    async def write_json(self, name: str, data: dict[str, Any]) -> Path:
        path = self.path(name)
        await wrap_async(Dynamic(data).to_file)(path)
        self.record(path)
        return path

    async def digests(self) -> Dynamic:
        return Dynamic({
            name: await md5(self.directory / name)
            for name in natsorted(self._artifacts)
        })

    async def _finish(self, status: str) -> None:
        digests = await self.digests()
        self.manifest.status = status
        self.manifest.finished = datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ')
        self.manifest.artifacts = digests
        self.manifest.volatile = natsorted(name for name, volatile in self._artifacts.items() if volatile)

        combined = '\n'.join(f'{name} {digest}' for name, digest in digests.items() if not self._artifacts[name])
        self.manifest.digest = text_digest(combined)

        await wrap_async(self.manifest.to_file)(self.directory / MANIFEST_FILENAME)

    async def commit(self) -> None:
        await self._finish('complete')

        for callback, on_commit, _ in self._callbacks:
            if on_commit:
                try:
                    await callback(self, True)

                except Exception:
                    self.log.exception('callback error during commit')

        self._callbacks.clear()

    async def rollback(self) -> None:
        with contextlib.suppress(OSError):
            await self._finish('failed')

        for callback, _, on_rollback in self._callbacks:
            if on_rollback:
                try:
                    await callback(self, False)

                except Exception:
                    self.log.exception('callback error during rollback')

        self._callbacks.clear()
