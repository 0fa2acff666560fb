"""The user's local collection: catalogs, install records, run history.

State lives in one canonical-JSON file ``collection.json`` under the
solcat home directory, guarded by an advisory lock file
``collection.lock`` (ASCII PID + newline). All mutations are persisted
atomically via temp-file-then-rename, so a crash at any point leaves
either the prior state or the new state on disk.

The pure state functions here never touch the filesystem; the
CollectionHandle owns the lock and the single-writer persistence
discipline.
"""

from __future__ import annotations

import enum
import os
import re
import threading
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path

from .coords import Coordinates, Version
from .errors import (
    CorruptState,
    IllegalTransition,
    LockHeld,
    NotInstalled,
    UnknownSolution,
)
from .jsonutil import atomic_write_bytes, canonical_bytes, load_json_file
from .timeutil import format_ts, parse_ts

SCHEMA_VERSION = Version(1, 0, 0)
STATE_FILE_NAME = "collection.json"
LOCK_FILE_NAME = "collection.lock"
RUN_HISTORY_CAPACITY = 100

CatalogKind = str  # "directory" | "vcs"


@dataclass(frozen=True)
class CatalogRecord:
    name: str
    source: str
    kind: CatalogKind
    cache_path: str


class InstallState(str, enum.Enum):
    INSTALLING = "installing"
    INSTALLED = "installed"
    INSTALL_FAILED = "install_failed"
    UNINSTALLING = "uninstalling"


# target state -> set of legal current states (None means "absent")
_LEGAL_TRANSITIONS: dict[InstallState | None, set[InstallState | None]] = {
    InstallState.INSTALLING: {None, InstallState.INSTALL_FAILED},
    InstallState.INSTALLED: {InstallState.INSTALLING},
    InstallState.INSTALL_FAILED: {InstallState.INSTALLING},
    InstallState.UNINSTALLING: {InstallState.INSTALLED},
    None: {InstallState.UNINSTALLING, InstallState.INSTALL_FAILED},
}


@dataclass(frozen=True)
class InstallRecord:
    coordinates: Coordinates
    catalog_name: str
    state: InstallState
    environment_name: str
    install_path: str
    installed_at: datetime | None = None
    orphaned: bool = False


@dataclass(frozen=True)
class RunEvent:
    coordinates: Coordinates
    started_at: datetime
    finished_at: datetime | None = None
    exit_status: int | None = None
    args_rendered: tuple[str, ...] = ()


@dataclass(frozen=True)
class CollectionState:
    schema_version: Version = SCHEMA_VERSION
    catalogs: tuple[CatalogRecord, ...] = ()
    installs: tuple[InstallRecord, ...] = ()
    runs: tuple[RunEvent, ...] = ()  # most recent first, capacity bounded

    def catalog(self, name: str) -> CatalogRecord | None:
        for record in self.catalogs:
            if record.name == name:
                return record
        return None

    def install(self, coordinates: Coordinates) -> InstallRecord | None:
        for record in self.installs:
            if record.coordinates == coordinates:
                return record
        return None


# --- pure state transitions ---------------------------------------------------

def transition_install(
    state: CollectionState,
    coordinates: Coordinates,
    new_state: InstallState | None,
    *,
    catalog_name: str | None = None,
    environment_name: str | None = None,
    install_path: str | None = None,
    installed_at: datetime | None = None,
) -> CollectionState:
    """Apply one step of the install state machine.

    ``new_state=None`` removes the record (legal only from Uninstalling
    or InstallFailed). Creating a record (absent -> Installing) requires
    catalog_name, environment_name, and install_path.
    """
    record = state.install(coordinates)
    current = record.state if record else None
    if record is None and new_state is not InstallState.INSTALLING:
        raise UnknownSolution(f"no install record for {coordinates.render()}")
    if current not in _LEGAL_TRANSITIONS[new_state]:
        raise IllegalTransition(
            coordinates.render(),
            current.value if current else "absent",
            new_state.value if new_state else "absent",
        )
    others = tuple(r for r in state.installs if r.coordinates != coordinates)
    if new_state is None:
        return replace(state, installs=others)
    if record is None:
        if not (catalog_name and environment_name and install_path):
            raise ValueError("creating an install record requires catalog_name, environment_name, install_path")
        record = InstallRecord(
            coordinates=coordinates,
            catalog_name=catalog_name,
            state=new_state,
            environment_name=environment_name,
            install_path=install_path,
        )
    else:
        record = replace(
            record,
            state=new_state,
            installed_at=installed_at if new_state is InstallState.INSTALLED else record.installed_at,
        )
        if new_state is InstallState.INSTALLING:
            # retry after a failure may land in a different catalog or path
            record = replace(
                record,
                catalog_name=catalog_name or record.catalog_name,
                environment_name=environment_name or record.environment_name,
                install_path=install_path or record.install_path,
                installed_at=None,
            )
    return replace(state, installs=others + (record,))


_KEY_PREFIX_RE = re.compile(r"^[-A-Za-z_][-A-Za-z0-9_]*$")


def _basename_of(token: str) -> str:
    if "/" not in token and "\\" not in token:
        return token
    parts = [part for part in re.split(r"[/\\]", token) if part]
    return parts[-1] if parts else token


def redact_path_token(token: str) -> str:
    """Reduce file-system paths to basenames for persisted run history.

    ``name=value`` tokens keep their key and redact only the value.
    """
    key, sep, value = token.partition("=")
    if sep and _KEY_PREFIX_RE.match(key):
        return f"{key}={_basename_of(value)}"
    return _basename_of(token)


def record_run(state: CollectionState, event: RunEvent) -> CollectionState:
    """Prepend a run event (args redacted); history is capacity-bounded."""
    record = state.install(event.coordinates)
    if record is None or record.state is not InstallState.INSTALLED:
        raise NotInstalled(f"{event.coordinates.render()} is not installed")
    if event.finished_at is not None and event.finished_at < event.started_at:
        raise ValueError("finished_at precedes started_at")
    persisted = replace(event, args_rendered=tuple(redact_path_token(t) for t in event.args_rendered))
    runs = (persisted,) + state.runs
    return replace(state, runs=runs[:RUN_HISTORY_CAPACITY])


def list_recent(state: CollectionState, limit: int) -> list[tuple[Coordinates, RunEvent]]:
    """Distinct coordinates ordered by most recent start, truncated to limit."""
    if limit <= 0:
        raise ValueError("limit must be positive")
    seen: set[Coordinates] = set()
    recent = []
    for event in state.runs:
        if event.coordinates in seen:
            continue
        seen.add(event.coordinates)
        recent.append((event.coordinates, event))
        if len(recent) == limit:
            break
    return recent


def with_catalog(state: CollectionState, record: CatalogRecord) -> CollectionState:
    return replace(state, catalogs=state.catalogs + (record,))


def without_catalog(state: CollectionState, name: str) -> CollectionState:
    """Drop a catalog record; installs that referenced it become orphaned."""
    catalogs = tuple(r for r in state.catalogs if r.name != name)
    installs = tuple(
        replace(r, orphaned=True) if r.catalog_name == name else r for r in state.installs
    )
    return replace(state, catalogs=catalogs, installs=installs)


# --- (de)serialization --------------------------------------------------------

def state_to_dict(state: CollectionState) -> dict:
    return {
        "schema_version": state.schema_version.render(),
        "catalogs": [
            {"name": c.name, "source": c.source, "kind": c.kind, "cache_path": c.cache_path}
            for c in state.catalogs
        ],
        "installs": [
            {
                "coordinates": r.coordinates.render(),
                "catalog_name": r.catalog_name,
                "state": r.state.value,
                "environment_name": r.environment_name,
                "install_path": r.install_path,
                "installed_at": format_ts(r.installed_at) if r.installed_at else None,
                "orphaned": r.orphaned,
            }
            for r in sorted(state.installs, key=lambda r: r.coordinates.render())
        ],
        "runs": [
            {
                "coordinates": e.coordinates.render(),
                "started_at": format_ts(e.started_at),
                "finished_at": format_ts(e.finished_at) if e.finished_at else None,
                "exit_status": e.exit_status,
                "args_rendered": list(e.args_rendered),
            }
            for e in state.runs
        ],
    }


def state_from_dict(obj: dict) -> CollectionState:
    schema_version = Version.parse(obj["schema_version"])
    if schema_version != SCHEMA_VERSION:
        raise CorruptState(
            f"state file schema {schema_version.render()} does not match "
            f"supported {SCHEMA_VERSION.render()}; migrate or remove the file manually"
        )
    catalogs = tuple(
        CatalogRecord(c["name"], c["source"], c["kind"], c["cache_path"]) for c in obj["catalogs"]
    )
    installs = tuple(
        InstallRecord(
            coordinates=Coordinates.parse(r["coordinates"]),
            catalog_name=r["catalog_name"],
            state=InstallState(r["state"]),
            environment_name=r["environment_name"],
            install_path=r["install_path"],
            installed_at=parse_ts(r["installed_at"]) if r["installed_at"] else None,
            orphaned=r["orphaned"],
        )
        for r in obj["installs"]
    )
    runs = tuple(
        RunEvent(
            coordinates=Coordinates.parse(e["coordinates"]),
            started_at=parse_ts(e["started_at"]),
            finished_at=parse_ts(e["finished_at"]) if e["finished_at"] else None,
            exit_status=e["exit_status"],
            args_rendered=tuple(e["args_rendered"]),
        )
        for e in obj["runs"]
    )
    return CollectionState(schema_version, catalogs, installs, runs)


# --- lock + handle --------------------------------------------------------------

def _acquire_lock(lock_path: Path):
    """Take the exclusive advisory lock, writing our PID into the file.

    Uses OS-level locks (flock / msvcrt) that evaporate with the holding
    process, so a crashed holder never wedges the collection.
    """
    fd = os.open(lock_path, os.O_CREAT | os.O_RDWR, 0o644)
    try:
        if os.name == "nt":  # pragma: no cover - exercised on Windows only
            import msvcrt

            msvcrt.locking(fd, msvcrt.LK_NBLCK, 1)
        else:
            import fcntl

            fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
    except OSError:
        holder: int | None = None
        try:
            content = os.read(fd, 64).decode("ascii", "replace").strip()
            holder = int(content) if content.isdigit() else None
        except OSError:
            pass
        os.close(fd)
        raise LockHeld(holder, lock_path) from None
    os.ftruncate(fd, 0)
    os.write(fd, f"{os.getpid()}\n".encode("ascii"))
    os.fsync(fd)
    return fd


def _release_lock(fd: int, lock_path: Path) -> None:
    try:
        if os.name == "nt":  # pragma: no cover
            import msvcrt

            os.lseek(fd, 0, os.SEEK_SET)
            msvcrt.locking(fd, msvcrt.LK_UNLCK, 1)
        else:
            import fcntl

            fcntl.flock(fd, fcntl.LOCK_UN)
        try:
            os.unlink(lock_path)
        except OSError:
            pass
    finally:
        os.close(fd)


class CollectionHandle:
    """Exclusive, persisted view of one collection home.

    All mutations flow through :meth:`apply`, which serializes writers
    within the process and persists the new state atomically before
    returning. Snapshots returned by :attr:`state` are immutable and may
    be shared freely across threads.
    """

    def __init__(self, home: Path, lock_fd: int, state: CollectionState):
        self.home = Path(home)
        self._lock_fd = lock_fd
        self._state = state
        self._mutex = threading.RLock()
        self._closed = False

    @property
    def state(self) -> CollectionState:
        with self._mutex:
            return self._state

    @property
    def state_path(self) -> Path:
        return self.home / STATE_FILE_NAME

    def apply(self, fn, *args, **kwargs) -> CollectionState:
        """Run ``fn(state, *args, **kwargs) -> state`` and persist the result."""
        with self._mutex:
            if self._closed:
                raise RuntimeError("collection handle is closed")
            new_state = fn(self._state, *args, **kwargs)
            atomic_write_bytes(self.state_path, canonical_bytes(state_to_dict(new_state)))
            self._state = new_state
            return new_state

    def reload(self) -> CollectionState:
        with self._mutex:
            self._state = _load_state(self.state_path)
            return self._state

    def close(self) -> None:
        with self._mutex:
            if self._closed:
                return
            self._closed = True
            _release_lock(self._lock_fd, self.home / LOCK_FILE_NAME)

    def __enter__(self) -> "CollectionHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _load_state(path: Path) -> CollectionState:
    try:
        obj = load_json_file(path)
        return state_from_dict(obj)
    except CorruptState:
        raise
    except Exception as exc:
        raise CorruptState(
            f"cannot parse state file {path}: {exc}; the file was left untouched — "
            "recover it manually or remove it to start a fresh collection"
        ) from None


def default_home() -> Path:
    """SOLCAT_HOME, or a per-user data directory."""
    env = os.environ.get("SOLCAT_HOME")
    if env:
        return Path(env)
    if os.name == "nt":  # pragma: no cover
        base = Path(os.environ.get("APPDATA", Path.home() / "AppData" / "Roaming"))
    elif os.uname().sysname == "Darwin":  # pragma: no cover
        base = Path.home() / "Library" / "Application Support"
    else:
        base = Path(os.environ.get("XDG_DATA_HOME", Path.home() / ".local" / "share"))
    return base / "solcat"


def open_collection(home: Path | str | None = None) -> CollectionHandle:
    """Open (or initialize) the collection at ``home`` under an exclusive lock.

    Raises LockHeld when another process holds the lock and CorruptState
    when an existing state file cannot be parsed; in the latter case the
    file is left exactly as found.
    """
    home = Path(home) if home is not None else default_home()
    home.mkdir(parents=True, exist_ok=True)
    lock_fd = _acquire_lock(home / LOCK_FILE_NAME)
    try:
        state_path = home / STATE_FILE_NAME
        if state_path.exists():
            state = _load_state(state_path)
        else:
            state = CollectionState()
            atomic_write_bytes(state_path, canonical_bytes(state_to_dict(state)))
    except BaseException:
        _release_lock(lock_fd, home / LOCK_FILE_NAME)
        raise
    return CollectionHandle(home, lock_fd, state)
