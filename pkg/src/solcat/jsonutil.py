"""Canonical JSON serialization used for every file solcat writes.

Canonical form: UTF-8, keys sorted lexicographically, two-space
indentation, LF line endings, one trailing newline. Two structurally
equal values always serialize to identical bytes, which is what makes
index checksums and sync idempotence byte-exact.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any


def canonical_bytes(value: Any) -> bytes:
    text = json.dumps(value, sort_keys=True, indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def load_json_bytes(data: bytes) -> Any:
    return json.loads(data.decode("utf-8"))


def load_json_file(path: Path) -> Any:
    return load_json_bytes(Path(path).read_bytes())


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write ``data`` to ``path`` via temp-file-then-rename.

    A crash at any point leaves either the old file or the new file,
    never a partial write. The temp file lives in the target directory
    so the rename stays on one filesystem.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(temp_name, path)
        temp_name = None
    finally:
        if temp_name and os.path.exists(temp_name):
            try:
                os.unlink(temp_name)
            except OSError:
                pass


def atomic_write_json(path: Path, value: Any) -> None:
    atomic_write_bytes(path, canonical_bytes(value))
