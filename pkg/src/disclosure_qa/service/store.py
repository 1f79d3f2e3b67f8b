"""Object store abstraction with a local-filesystem implementation.

Keys are slash-separated relative paths under a batch prefix. The local
store rejects path escapes and serializes writes, so concurrent workers
and request handlers never interleave partial objects.
"""

from __future__ import annotations

import os
import tempfile
import threading
from pathlib import Path


class StoreError(Exception):
    pass


class LocalFsStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _path(self, key: str) -> Path:
        path = (self.root / key).resolve()
        if not path.is_relative_to(self.root.resolve()):
            raise StoreError(f"key escapes store root: {key!r}")
        return path

    def put(self, key: str, data: bytes) -> None:
        path = self._path(key)
        with self._write_lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                os.replace(tmp, path)
            except BaseException:
                try:
                    os.unlink(tmp)
                except OSError:
                    pass
                raise

    def get(self, key: str) -> bytes:
        path = self._path(key)
        try:
            return path.read_bytes()
        except FileNotFoundError as exc:
            raise KeyError(key) from exc

    def exists(self, key: str) -> bool:
        return self._path(key).is_file()

    def list(self, prefix: str) -> list[str]:
        """Keys under ``prefix`` (non-recursive directories excluded)."""
        base = self._path(prefix)
        if not base.exists():
            return []
        out = []
        for path in sorted(base.rglob("*")):
            if path.is_file() and not path.name.startswith(".tmp-"):
                out.append(str(path.relative_to(self.root)).replace(os.sep, "/"))
        return out

    def list_prefixes(self) -> list[str]:
        """Top-level directories (batch ids)."""
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())
