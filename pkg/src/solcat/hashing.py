"""Content checksums; SHA-256 hex is the only digest used anywhere."""

from __future__ import annotations

import hashlib
from pathlib import Path


def compute_checksum(data: bytes) -> str:
    """64 lowercase hex chars of SHA-256 over the exact bytes."""
    return hashlib.sha256(data).hexdigest()


def file_checksum(path: Path) -> str:
    return compute_checksum(Path(path).read_bytes())
