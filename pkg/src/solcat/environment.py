"""Isolated execution environments behind a pluggable backend.

Two backends ship in v1. The ``external`` backend drives a
conda-compatible manager binary through configurable command templates
and an environment file rendered from the solution's spec. The ``plain``
backend performs no isolation at all: commands run directly on the host.
It exists so the whole lifecycle is verifiable with no network and no
external tooling, and is the backend of choice for tests and CI.

Both backends keep their own record of created environments under
``state_dir``, so existence checks behave identically regardless of
which backend runs.
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .coords import Coordinates
from .errors import (
    BackendFailure,
    BackendUnavailable,
    EnvironmentExists,
    SpawnFailure,
    UnknownEnvironment,
)
from .jsonutil import atomic_write_json, load_json_file
from .timeutil import format_ts, parse_ts, utc_now

ENV_BIN_VAR = "SOLCAT_ENV_BIN"

DEFAULT_CREATE_COMMAND = "env create --yes --name {name} --file {file}"
DEFAULT_RUN_COMMAND = "run --name {name}"
DEFAULT_REMOVE_COMMAND = "env remove --yes --name {name}"


@dataclass(frozen=True)
class EnvironmentHandle:
    name: str
    backend_id: str
    created_at: datetime


@dataclass(frozen=True)
class BackendConfig:
    backend_id: str  # "plain" | "external"
    state_dir: Path
    executable: str | None = None
    extra_args: tuple[str, ...] = ()
    create_command: str = DEFAULT_CREATE_COMMAND
    run_command: str = DEFAULT_RUN_COMMAND
    remove_command: str = DEFAULT_REMOVE_COMMAND

    def resolve_executable(self) -> str:
        candidate = self.executable or os.environ.get(ENV_BIN_VAR) or "conda"
        resolved = shutil.which(candidate)
        if resolved is None and Path(candidate).is_file():
            resolved = candidate
        if resolved is None:
            raise BackendUnavailable(f"environment manager executable not found: {candidate!r}")
        return resolved


def plain_config(state_dir: Path) -> BackendConfig:
    return BackendConfig("plain", Path(state_dir))


def external_config(state_dir: Path, executable: str | None = None, **kwargs) -> BackendConfig:
    return BackendConfig("external", Path(state_dir), executable=executable, **kwargs)


def derive_env_name(coordinates: Coordinates) -> str:
    """``solcat_`` + canonical coordinates with ``:`` and ``.`` mapped to ``_``."""
    return "solcat_" + coordinates.render().replace(":", "_").replace(".", "_")


def render_environment_file(name: str, channels, dependencies) -> str:
    """Minimal environment YAML in declared order; bit-exact for reproducibility."""
    lines = [f"name: {name}", "channels:"]
    lines += [f"  - {channel}" for channel in channels]
    lines.append("dependencies:")
    lines += [f"  - {dep}" for dep in dependencies]
    return "\n".join(lines) + "\n"


# --- registry of created environments ----------------------------------------

_registry_mutex = threading.Lock()


def _registry_path(cfg: BackendConfig) -> Path:
    return Path(cfg.state_dir) / f"{cfg.backend_id}_envs.json"


def _load_registry(cfg: BackendConfig) -> dict:
    path = _registry_path(cfg)
    if not path.exists():
        return {}
    return load_json_file(path)


def _store_registry(cfg: BackendConfig, registry: dict) -> None:
    atomic_write_json(_registry_path(cfg), registry)


def environment_handle(cfg: BackendConfig, name: str) -> EnvironmentHandle | None:
    with _registry_mutex:
        entry = _load_registry(cfg).get(name)
    if entry is None:
        return None
    return EnvironmentHandle(name, cfg.backend_id, parse_ts(entry["created_at"]))


# --- operations ---------------------------------------------------------------

def create_environment(cfg: BackendConfig, name: str, spec) -> EnvironmentHandle:
    """Create the named environment from an EnvironmentSpec.

    The plain backend only records the handle; no process is spawned.
    """
    with _registry_mutex:
        registry = _load_registry(cfg)
        if name in registry:
            raise EnvironmentExists(f"environment already exists: {name}")
        if cfg.backend_id == "external":
            executable = cfg.resolve_executable()
            content = render_environment_file(name, spec.channels, spec.dependencies)
            fd, env_file = tempfile.mkstemp(prefix="solcat_env_", suffix=".yml")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as handle:
                    handle.write(content)
                # format after splitting so paths with spaces survive
                argv = (
                    [executable]
                    + [part.format(name=name, file=env_file) for part in shlex.split(cfg.create_command)]
                    + list(cfg.extra_args)
                )
                result = subprocess.run(argv, capture_output=True, text=True)
                if result.returncode != 0:
                    raise BackendFailure(
                        f"create command exited {result.returncode}", result.stderr
                    )
            finally:
                try:
                    os.unlink(env_file)
                except OSError:
                    pass
        handle_obj = EnvironmentHandle(name, cfg.backend_id, utc_now())
        registry[name] = {"created_at": format_ts(handle_obj.created_at)}
        _store_registry(cfg, registry)
    return handle_obj


class _LineMux:
    """Writes prefixed lines from both child streams into one sink."""

    def __init__(self, sink):
        self._sink = sink
        self._mutex = threading.Lock()

    def pump(self, stream, prefix: str) -> None:
        for line in iter(stream.readline, ""):
            with self._mutex:
                self._sink.write(f"{prefix} {line.rstrip(chr(10))}\n")
        stream.close()


def execute_in_environment(
    cfg: BackendConfig,
    handle: EnvironmentHandle,
    argv: list[str],
    workdir: Path,
    log_sink,
) -> int:
    """Run argv inside the environment, multiplexing output into log_sink.

    Each output line is prefixed ``OUT `` or ``ERR ``. The child's exit
    status is returned as data; a nonzero status is not an error.
    """
    if not argv:
        raise ValueError("argv must be non-empty")
    if environment_handle(cfg, handle.name) is None:
        raise UnknownEnvironment(f"no such environment: {handle.name}")
    if cfg.backend_id == "external":
        executable = cfg.resolve_executable()
        full_argv = (
            [executable]
            + [part.format(name=handle.name) for part in shlex.split(cfg.run_command)]
            + list(cfg.extra_args)
            + list(argv)
        )
    else:
        full_argv = list(argv)
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    try:
        process = subprocess.Popen(
            full_argv,
            cwd=workdir,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            errors="replace",
        )
    except OSError as exc:
        raise SpawnFailure(f"cannot start {full_argv[0]!r}: {exc}") from None
    mux = _LineMux(log_sink)
    readers = [
        threading.Thread(target=mux.pump, args=(process.stdout, "OUT"), daemon=True),
        threading.Thread(target=mux.pump, args=(process.stderr, "ERR"), daemon=True),
    ]
    for reader in readers:
        reader.start()
    status = process.wait()
    for reader in readers:
        reader.join()
    return status


def remove_environment(cfg: BackendConfig, handle: EnvironmentHandle) -> bool:
    """Remove the environment; idempotent.

    Returns True when an environment was actually removed, False when it
    was already absent (logged as an AlreadyAbsent warning by callers).
    """
    with _registry_mutex:
        registry = _load_registry(cfg)
        if handle.name not in registry:
            return False
        if cfg.backend_id == "external":
            executable = cfg.resolve_executable()
            argv = (
                [executable]
                + [part.format(name=handle.name) for part in shlex.split(cfg.remove_command)]
                + list(cfg.extra_args)
            )
            result = subprocess.run(argv, capture_output=True, text=True)
            if result.returncode != 0:
                raise BackendFailure(f"remove command exited {result.returncode}", result.stderr)
        del registry[handle.name]
        _store_registry(cfg, registry)
    return True
