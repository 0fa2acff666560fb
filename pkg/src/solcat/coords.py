"""Solution identity: strict three-component versions and coordinates.

Coordinates ``group:name:version`` are the globally unambiguous address
of one solution. Versions carry no build metadata and no ranges: the
point is version transparency, not constraint solving.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import total_ordering

from .errors import SchemaViolation

_GROUP_RE = re.compile(r"^[a-z0-9][a-z0-9._-]*$")
_NAME_RE = re.compile(r"^[a-z0-9][a-z0-9_-]*$")
_NUMERIC_RE = re.compile(r"^(0|[1-9][0-9]*)$")
_IDENT_RE = re.compile(r"^[0-9A-Za-z-]+$")


class Ordering(enum.Enum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def _parse_component(text: str, what: str) -> int:
    # leading zeros are rejected so that equal versions always have
    # identical canonical renderings
    if not _NUMERIC_RE.match(text):
        raise ValueError(f"invalid {what} component: {text!r}")
    return int(text)


@total_ordering
@dataclass(frozen=True)
class Version:
    major: int
    minor: int = 0
    patch: int = 0
    prerelease: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for value, what in ((self.major, "major"), (self.minor, "minor"), (self.patch, "patch")):
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"{what} must be a non-negative integer, got {value!r}")
        object.__setattr__(self, "prerelease", tuple(self.prerelease))
        for ident in self.prerelease:
            if not _IDENT_RE.match(ident):
                raise ValueError(f"invalid prerelease identifier: {ident!r}")
            if ident.isdigit() and not _NUMERIC_RE.match(ident):
                raise ValueError(f"numeric prerelease identifier has leading zeros: {ident!r}")

    @classmethod
    def parse(cls, text: str) -> "Version":
        """Parse canonical ``M.m.p[-pre.release.ids]`` text."""
        if not isinstance(text, str):
            raise ValueError(f"version must be a string, got {type(text).__name__}")
        release, sep, pre = text.partition("-")
        parts = release.split(".")
        if len(parts) != 3:
            raise ValueError(f"version must have three components: {text!r}")
        major, minor, patch = (
            _parse_component(parts[0], "major"),
            _parse_component(parts[1], "minor"),
            _parse_component(parts[2], "patch"),
        )
        prerelease: tuple[str, ...] = ()
        if sep:
            if not pre:
                raise ValueError(f"empty prerelease in version: {text!r}")
            prerelease = tuple(pre.split("."))
            if any(not ident for ident in prerelease):
                raise ValueError(f"empty prerelease identifier in version: {text!r}")
        return cls(major, minor, patch, prerelease)

    def render(self) -> str:
        base = f"{self.major}.{self.minor}.{self.patch}"
        if self.prerelease:
            return base + "-" + ".".join(self.prerelease)
        return base

    def __str__(self) -> str:
        return self.render()

    def __lt__(self, other: "Version") -> bool:
        if not isinstance(other, Version):
            return NotImplemented
        return compare_versions(self, other) is Ordering.LESS


def _compare_identifiers(a: str, b: str) -> int:
    if a == b:
        return 0
    if a.isdigit() and b.isdigit():
        return -1 if int(a) < int(b) else 1
    return -1 if a < b else 1


def compare_versions(a: Version, b: Version) -> Ordering:
    """Total order over versions.

    Numeric on (major, minor, patch); any prerelease sorts below the
    same release triple; prerelease identifiers compare numerically when
    both numeric, lexically otherwise; on a common prefix the shorter
    identifier list sorts first.
    """
    for x, y in ((a.major, b.major), (a.minor, b.minor), (a.patch, b.patch)):
        if x != y:
            return Ordering.LESS if x < y else Ordering.GREATER
    if not a.prerelease and not b.prerelease:
        return Ordering.EQUAL
    if not a.prerelease:
        return Ordering.GREATER
    if not b.prerelease:
        return Ordering.LESS
    for ia, ib in zip(a.prerelease, b.prerelease):
        result = _compare_identifiers(ia, ib)
        if result:
            return Ordering.LESS if result < 0 else Ordering.GREATER
    if len(a.prerelease) == len(b.prerelease):
        return Ordering.EQUAL
    return Ordering.LESS if len(a.prerelease) < len(b.prerelease) else Ordering.GREATER


@dataclass(frozen=True)
class Coordinates:
    # not orderable on purpose: index entries sort by the canonical
    # rendering string, which disagrees with field-tuple order for
    # dotted groups
    group: str
    name: str
    version: Version

    def __post_init__(self):
        if not _GROUP_RE.match(self.group):
            raise ValueError(f"invalid group: {self.group!r}")
        if not _NAME_RE.match(self.name):
            raise ValueError(f"invalid name: {self.name!r}")

    @classmethod
    def parse(cls, text: str) -> "Coordinates":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"coordinates must be group:name:version, got {text!r}")
        return cls(parts[0], parts[1], Version.parse(parts[2]))

    def render(self) -> str:
        return f"{self.group}:{self.name}:{self.version.render()}"

    def __str__(self) -> str:
        return self.render()


def parse_coordinates_field(text, path: str) -> Coordinates:
    """Parse a coordinates string from a document, raising SchemaViolation at ``path``."""
    if not isinstance(text, str):
        raise SchemaViolation(path, f"expected a coordinates string, got {type(text).__name__}")
    try:
        return Coordinates.parse(text)
    except ValueError as exc:
        raise SchemaViolation(path, str(exc)) from None
