"""UTC timestamp helpers; everything persisted is timezone-aware ISO 8601."""

from __future__ import annotations

from datetime import datetime, timezone


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()


def parse_ts(text: str) -> datetime:
    return datetime.fromisoformat(text)


def file_stamp(ts: datetime) -> str:
    """Filesystem-safe, sortable form used in log and workspace names."""
    return ts.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%S%f")
