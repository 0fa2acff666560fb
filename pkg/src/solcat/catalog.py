"""Catalogs: remote or local bundles of solutions, synced into a local cache.

A catalog is a directory tree (or a git repository holding one) with the
canonical layout ``solutions/<group>/<name>/<version>/solution.json``
and a ``catalog.json`` marker at the root. Syncing copies the source
into the collection's cache and rebuilds a checksummed index from the
cached files; a remote-provided index is never trusted. Two syncs of an
unchanged source produce byte-identical serialized indices.
"""

from __future__ import annotations

import logging
import os
import re
import shutil
import subprocess
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from urllib.parse import urlparse

from .collection import CatalogRecord, CollectionHandle, InstallState, with_catalog, without_catalog
from .coords import Coordinates, Version
from .errors import (
    CatalogBusy,
    DuplicateCatalogName,
    IndexConflict,
    InvalidSource,
    SolcatError,
    SourceUnreachable,
    UnknownCatalog,
)
from .hashing import compute_checksum
from .jsonutil import atomic_write_bytes, canonical_bytes, load_json_file
from .manifest import Finding, SolutionManifest, parse_manifest
from .timeutil import format_ts, parse_ts, utc_now

logger = logging.getLogger(__name__)

VCS_BIN_VAR = "SOLCAT_VCS_BIN"
CATALOG_FILE_NAME = "catalog.json"
INDEX_FILE_NAME = "index.json"
INDEX_SCHEMA_VERSION = Version(1, 0, 0)

_VCS_SCHEMES = {"http", "https", "git", "ssh"}


@dataclass(frozen=True)
class IndexEntry:
    coordinates: Coordinates
    relative_path: str
    checksum: str
    updated_at: datetime


@dataclass(frozen=True)
class CatalogIndex:
    catalog_name: str
    schema_version: Version
    entries: tuple[IndexEntry, ...]  # sorted by canonical coordinate rendering

    def entry(self, coordinates: Coordinates) -> IndexEntry | None:
        for entry in self.entries:
            if entry.coordinates == coordinates:
                return entry
        return None


def index_to_dict(index: CatalogIndex) -> dict:
    return {
        "catalog_name": index.catalog_name,
        "schema_version": index.schema_version.render(),
        "entries": [
            {
                "coordinates": e.coordinates.render(),
                "relative_path": e.relative_path,
                "checksum": e.checksum,
                "updated_at": format_ts(e.updated_at),
            }
            for e in index.entries
        ],
    }


def index_from_dict(obj: dict) -> CatalogIndex:
    return CatalogIndex(
        catalog_name=obj["catalog_name"],
        schema_version=Version.parse(obj["schema_version"]),
        entries=tuple(
            IndexEntry(
                coordinates=Coordinates.parse(e["coordinates"]),
                relative_path=e["relative_path"],
                checksum=e["checksum"],
                updated_at=parse_ts(e["updated_at"]),
            )
            for e in obj["entries"]
        ),
    )


def serialize_index(index: CatalogIndex) -> bytes:
    return canonical_bytes(index_to_dict(index))


def index_checksum(index: CatalogIndex) -> str:
    return compute_checksum(serialize_index(index))


def classify_source(source: str) -> str:
    """``vcs`` for URL-shaped sources, ``directory`` for local paths.

    ``file://`` URLs count as vcs: they are the standard way to treat a
    local repository as a clone source.
    """
    if source.startswith("git@"):
        return "vcs"
    parsed = urlparse(source)
    if parsed.scheme == "file" and parsed.path:
        return "vcs"
    if parsed.scheme in _VCS_SCHEMES and parsed.netloc:
        return "vcs"
    return "directory"


def content_root(record: CatalogRecord) -> Path:
    """Directory under which cached entry paths resolve."""
    return Path(record.cache_path)


def cached_index_path(record: CatalogRecord) -> Path:
    return Path(record.cache_path) / INDEX_FILE_NAME


def load_cached_index(record: CatalogRecord) -> CatalogIndex | None:
    path = cached_index_path(record)
    if not path.exists():
        return None
    return index_from_dict(load_json_file(path))


# --- per-catalog sync serialization -------------------------------------------

_locks_mutex = threading.Lock()
_sync_locks: dict[str, threading.Lock] = {}


def _sync_lock(name: str) -> threading.Lock:
    with _locks_mutex:
        return _sync_locks.setdefault(name, threading.Lock())


# --- sync ----------------------------------------------------------------------

def _vcs_bin() -> str:
    return os.environ.get(VCS_BIN_VAR, "git")


def _fetch_vcs(source: str, checkout: Path) -> None:
    # shallow clone of the default branch; re-cloned from scratch each
    # sync for the simplest possible update semantics
    if checkout.exists():
        shutil.rmtree(checkout)
    checkout.parent.mkdir(parents=True, exist_ok=True)
    result = subprocess.run(
        [_vcs_bin(), "clone", "--quiet", "--depth", "1", source, str(checkout)],
        capture_output=True,
        text=True,
    )
    if result.returncode != 0:
        raise SourceUnreachable(f"cannot clone {source}: {result.stderr.strip()}")


def _mirror_source(record: CatalogRecord) -> Path:
    """Bring the source's file tree into the cache; returns the mirrored root."""
    cache = Path(record.cache_path)
    cache.mkdir(parents=True, exist_ok=True)
    if record.kind == "vcs":
        staging = cache / ".vcs"
        _fetch_vcs(record.source, staging)
        source_root = staging
    else:
        source_root = Path(record.source)
        if not source_root.is_dir():
            raise SourceUnreachable(f"catalog source is not a directory: {record.source}")
    if not (source_root / CATALOG_FILE_NAME).is_file():
        raise SourceUnreachable(f"source has no {CATALOG_FILE_NAME}: {record.source}")
    shutil.copy2(source_root / CATALOG_FILE_NAME, cache / CATALOG_FILE_NAME)
    target = cache / "solutions"
    if target.exists():
        shutil.rmtree(target)
    if (source_root / "solutions").is_dir():
        shutil.copytree(source_root / "solutions", target)
    else:
        target.mkdir()
    return cache


def _scan_solutions(root: Path, warnings: list[Finding]) -> list[tuple[str, Coordinates, bytes]]:
    found: list[tuple[str, Coordinates, bytes]] = []
    claims: dict[str, str] = {}
    for path in sorted(root.glob("solutions/*/*/*/solution.json")):
        relative = path.relative_to(root).as_posix()
        data = path.read_bytes()
        try:
            manifest = parse_manifest(data)
        except SolcatError as exc:
            warnings.append(Finding("CorruptSolution", relative, str(exc)))
            continue
        rendered = manifest.coordinates.render()
        if rendered in claims:
            raise IndexConflict(rendered, [claims[rendered], relative])
        claims[rendered] = relative
        group, name, version = path.parts[-4], path.parts[-3], path.parts[-2]
        expected = f"solutions/{group}/{name}/{version}/solution.json"
        if (manifest.coordinates.group, manifest.coordinates.name, manifest.coordinates.version.render()) != (
            group,
            name,
            version,
        ):
            warnings.append(
                Finding(
                    "CorruptSolution",
                    relative,
                    f"embedded coordinates {rendered} do not match path {expected}",
                )
            )
            continue
        found.append((relative, manifest.coordinates, data))
    return found


def build_index(
    root: Path,
    catalog_name: str,
    previous: CatalogIndex | None = None,
    warnings: list[Finding] | None = None,
) -> CatalogIndex:
    """Scan a canonical-layout tree into a sorted, checksummed index.

    ``updated_at`` is carried forward from ``previous`` for entries whose
    bytes did not change, so rebuilding over unchanged content is
    byte-stable.
    """
    sink = warnings if warnings is not None else []
    carried = {}
    if previous is not None:
        carried = {(e.coordinates.render(), e.checksum): e.updated_at for e in previous.entries}
    entries = []
    for relative, coordinates, data in _scan_solutions(Path(root), sink):
        checksum = compute_checksum(data)
        updated_at = carried.get((coordinates.render(), checksum)) or utc_now()
        entries.append(IndexEntry(coordinates, relative, checksum, updated_at))
    entries.sort(key=lambda e: e.coordinates.render())
    return CatalogIndex(catalog_name, INDEX_SCHEMA_VERSION, tuple(entries))


def sync_catalog(record: CatalogRecord, warnings: list[Finding] | None = None) -> CatalogIndex:
    """Update the cache from the source and rebuild the checksummed index.

    Corrupt solution files exclude only themselves and are reported into
    ``warnings``; two files claiming the same coordinates abort the sync
    with IndexConflict. Syncing an unchanged source is idempotent down
    to the serialized index bytes.
    """
    sink = warnings if warnings is not None else []
    lock = _sync_lock(record.name)
    if not lock.acquire(blocking=False):
        raise CatalogBusy(f"sync already in progress for catalog {record.name!r}")
    try:
        cache = _mirror_source(record)
        index = build_index(cache, record.name, load_cached_index(record), sink)
        atomic_write_bytes(cached_index_path(record), serialize_index(index))
        for finding in sink:
            logger.warning("sync %s: %s at %s", record.name, finding.code, finding.path)
        return index
    finally:
        lock.release()


def write_empty_index(record: CatalogRecord) -> CatalogIndex:
    index = CatalogIndex(record.name, INDEX_SCHEMA_VERSION, ())
    atomic_write_bytes(cached_index_path(record), serialize_index(index))
    return index


def verify_catalog(record: CatalogRecord) -> list[Finding]:
    """Recompute checksums over cached files; one finding per mismatch."""
    index = load_cached_index(record)
    if index is None:
        return [Finding("MissingIndex", INDEX_FILE_NAME, "catalog has never been synced")]
    findings = []
    root = content_root(record)
    for entry in index.entries:
        path = root / entry.relative_path
        if not path.is_file():
            findings.append(Finding("MissingFile", entry.relative_path, "cached file is gone"))
            continue
        actual = compute_checksum(path.read_bytes())
        if actual != entry.checksum:
            findings.append(
                Finding(
                    "ChecksumMismatch",
                    entry.relative_path,
                    f"expected {entry.checksum}, found {actual}",
                )
            )
    return findings


# --- collection-level operations ------------------------------------------------

def add_catalog(handle: CollectionHandle, name: str, source: str) -> CatalogRecord:
    """Configure a catalog and perform its initial sync.

    On sync failure the record is still persisted with an empty cached
    index and the failure is logged; on InvalidSource nothing is added.
    """
    if handle.state.catalog(name) is not None:
        raise DuplicateCatalogName(f"catalog {name!r} already configured")
    # the name becomes a cache directory component, so it must be a plain
    # identifier (no separators, cannot start with a dot)
    if not re.match(r"^[A-Za-z0-9][A-Za-z0-9._-]*$", name):
        raise InvalidSource(f"invalid catalog name: {name!r}")
    kind = classify_source(source)
    if kind == "directory":
        source_path = Path(source).expanduser()
        if not source_path.is_dir():
            raise InvalidSource(f"catalog source path does not exist: {source}")
        source = str(source_path.resolve())
    record = CatalogRecord(
        name=name,
        source=source,
        kind=kind,
        cache_path=str(handle.home / "catalogs" / name),
    )
    handle.apply(with_catalog, record)
    try:
        sync_catalog(record)
    except SolcatError as exc:
        write_empty_index(record)
        logger.warning("initial sync of catalog %s failed: %s", name, exc)
    return record


def remove_catalog(handle: CollectionHandle, name: str) -> None:
    """Drop a catalog and its cache; installs from it stay, flagged orphaned."""
    record = handle.state.catalog(name)
    if record is None:
        raise UnknownCatalog(f"no catalog named {name!r}")
    busy = [
        r.coordinates.render()
        for r in handle.state.installs
        if r.catalog_name == name and r.state in (InstallState.INSTALLING, InstallState.UNINSTALLING)
    ]
    if busy:
        raise CatalogBusy(f"catalog {name!r} has operations in progress: {', '.join(busy)}")
    lock = _sync_lock(name)
    if not lock.acquire(blocking=False):
        raise CatalogBusy(f"catalog {name!r} is syncing")
    try:
        handle.apply(without_catalog, name)
        shutil.rmtree(record.cache_path, ignore_errors=True)
    finally:
        lock.release()


def sync_all(handle: CollectionHandle) -> dict[str, CatalogIndex]:
    return {record.name: sync_catalog(record) for record in handle.state.catalogs}


def _load_manifest_quietly(path: Path) -> SolutionManifest | None:
    try:
        return parse_manifest(path.read_bytes())
    except (OSError, SolcatError):
        return None


def search(
    sources: list[tuple[CatalogRecord, CatalogIndex]], query: str
) -> list[tuple[str, IndexEntry]]:
    """Case-insensitive substring search over coordinates, title, and tags.

    Title and tags come from the cached manifest files; the empty query
    matches everything. Results sort by (catalog_name, coordinates).
    """
    needle = query.lower()
    matches = []
    for record, index in sources:
        root = content_root(record)
        for entry in index.entries:
            haystack = [entry.coordinates.render().lower()]
            manifest = _load_manifest_quietly(root / entry.relative_path)
            if manifest is not None:
                haystack.append(manifest.title.lower())
                haystack.extend(tag.lower() for tag in manifest.tags)
            if not needle or any(needle in text for text in haystack):
                matches.append((index.catalog_name, entry))
    matches.sort(key=lambda pair: (pair[0], pair[1].coordinates.render()))
    return matches
