"""Lifecycle: resolve a solution reference, then install / test / run /
uninstall it, or drive a sequential pipeline of installed solutions.

References come in four shapes: (optionally catalog-qualified)
coordinates looked up in synced indices, a local file path, an HTTP(S)
URL, or a DOI resolved through the deposit resolver table. Every
lifecycle operation holds a per-solution mutex, so exactly one
install/uninstall/test/run is in flight per coordinates at a time;
distinct solutions proceed concurrently.
"""

from __future__ import annotations

import contextlib
import logging
import re
import shutil
import threading
import urllib.request
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .collection import CollectionHandle, InstallRecord, InstallState, RunEvent
from .collection import record_run as record_run_event
from .collection import transition_install
from .coords import Coordinates
from .deploy import LocalStubDepositClient
from .environment import (
    BackendConfig,
    EnvironmentHandle,
    create_environment,
    derive_env_name,
    environment_handle,
    execute_in_environment,
    remove_environment,
)
from .errors import (
    AlreadyInstalled,
    AmbiguousCoordinates,
    Busy,
    FetchFailure,
    FileArgumentMissing,
    InstallHookFailed,
    MissingArgument,
    NoTestHook,
    NotFound,
    NotInstalled,
    SchemaViolation,
    SolcatError,
    StepNotInstalled,
    UnknownArgument,
    UnknownCatalog,
    ValidationFailed,
)
from .jsonutil import load_json_bytes
from .manifest import (
    ArgKind,
    SOLUTION_FILE_NAME,
    SolutionManifest,
    coerce_argument,
    parse_manifest,
    render_argument,
    validate_manifest,
)
from .timeutil import file_stamp, utc_now

logger = logging.getLogger(__name__)

_DOI_RE = re.compile(r"^10\.[0-9]+/.+$")

EXTERNAL_PROVENANCE = "external"


@dataclass(frozen=True)
class SolutionRef:
    """Exactly one locator variant is populated."""

    coordinates: Coordinates | None = None
    catalog: str | None = None  # optional qualifier for the coordinates variant
    path: str | None = None
    url: str | None = None
    doi: str | None = None

    def __post_init__(self):
        populated = [v for v in (self.coordinates, self.path, self.url, self.doi) if v is not None]
        if len(populated) != 1:
            raise ValueError("exactly one of coordinates/path/url/doi must be set")
        if self.catalog is not None and self.coordinates is None:
            raise ValueError("catalog qualifier requires the coordinates variant")
        if self.doi is not None and not _DOI_RE.match(self.doi):
            raise ValueError(f"not a DOI: {self.doi!r}")

    def render(self) -> str:
        if self.coordinates is not None:
            rendered = self.coordinates.render()
            return f"{self.catalog}:{rendered}" if self.catalog else rendered
        return self.path or self.url or self.doi or ""


def parse_ref(text: str) -> SolutionRef:
    """Interpret a reference string as coordinates, path, URL, or DOI."""
    if _DOI_RE.match(text):
        return SolutionRef(doi=text)
    if text.startswith(("http://", "https://", "file://")):
        return SolutionRef(url=text)
    if "/" in text or "\\" in text or text.endswith(".json") or Path(text).exists():
        return SolutionRef(path=text)
    parts = text.split(":")
    try:
        if len(parts) == 3:
            return SolutionRef(coordinates=Coordinates.parse(text))
        if len(parts) == 4:
            return SolutionRef(coordinates=Coordinates.parse(":".join(parts[1:])), catalog=parts[0])
    except ValueError as exc:
        raise NotFound(f"cannot interpret reference {text!r}: {exc}") from None
    raise NotFound(f"cannot interpret reference {text!r}")


@dataclass(frozen=True)
class RunResult:
    coordinates: Coordinates
    exit_status: int
    log_path: Path
    duration: float


@dataclass(frozen=True)
class PipelineStep:
    ref: SolutionRef
    args: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class PipelineSpec:
    steps: tuple[PipelineStep, ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("pipeline must have at least one step")


def parse_pipeline_file(data: bytes) -> PipelineSpec:
    obj = load_json_bytes(data)
    if not isinstance(obj, dict) or not isinstance(obj.get("steps"), list):
        raise SchemaViolation("steps", "pipeline file must be an object with a steps list")
    steps = []
    for i, item in enumerate(obj["steps"]):
        if not isinstance(item, dict) or not isinstance(item.get("ref"), str):
            raise SchemaViolation(f"steps[{i}].ref", "each step needs a ref string")
        args = item.get("args", {})
        if not isinstance(args, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in args.items()
        ):
            raise SchemaViolation(f"steps[{i}].args", "args must map names to strings")
        steps.append(PipelineStep(parse_ref(item["ref"]), dict(args)))
    return PipelineSpec(tuple(steps))


# --- per-solution mutual exclusion ---------------------------------------------

_locks_mutex = threading.Lock()
_solution_locks: dict[str, threading.Lock] = {}


@contextlib.contextmanager
def _solution_lock(coordinates: Coordinates):
    with _locks_mutex:
        lock = _solution_locks.setdefault(coordinates.render(), threading.Lock())
    if not lock.acquire(blocking=False):
        raise Busy(f"another lifecycle operation is in progress for {coordinates.render()}")
    try:
        yield
    finally:
        lock.release()


# --- resolution -----------------------------------------------------------------

@dataclass(frozen=True)
class ResolvedSolution:
    manifest: SolutionManifest
    provenance: str  # catalog name or "external"
    file_path: Path  # local copy of the solution file
    asset_dir: Path | None  # directory holding sidecar assets, when local


def _from_local_file(path: Path) -> ResolvedSolution:
    path = Path(path)
    if path.is_dir():
        path = path / SOLUTION_FILE_NAME
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FetchFailure(f"cannot read {path}: {exc}") from None
    return ResolvedSolution(parse_manifest(data), EXTERNAL_PROVENANCE, path, path.parent)


def _fetch_url(handle: CollectionHandle, url: str) -> ResolvedSolution:
    try:
        with urllib.request.urlopen(url) as response:
            data = response.read()
    except OSError as exc:
        raise FetchFailure(f"cannot fetch {url}: {exc}") from None
    manifest = parse_manifest(data)
    fetched_dir = handle.home / "fetched" / uuid.uuid4().hex
    fetched_dir.mkdir(parents=True)
    file_path = fetched_dir / SOLUTION_FILE_NAME
    file_path.write_bytes(data)
    return ResolvedSolution(manifest, EXTERNAL_PROVENANCE, file_path, None)


def locate_solution(handle: CollectionHandle, ref: SolutionRef) -> ResolvedSolution:
    """Resolve a reference to a parsed manifest plus its local file."""
    from .catalog import content_root, load_cached_index  # local import, avoids a cycle

    if ref.path is not None:
        return _from_local_file(Path(ref.path))
    if ref.url is not None:
        return _fetch_url(handle, ref.url)
    if ref.doi is not None:
        location = LocalStubDepositClient(handle.home).resolve(ref.doi)
        if location.startswith(("http://", "https://", "file://")):
            return _fetch_url(handle, location)
        return _from_local_file(Path(location))

    coordinates = ref.coordinates
    assert coordinates is not None
    records = handle.state.catalogs
    if ref.catalog is not None:
        record = handle.state.catalog(ref.catalog)
        if record is None:
            raise UnknownCatalog(f"no catalog named {ref.catalog!r}")
        records = (record,)
    candidates = []
    for record in records:
        index = load_cached_index(record)
        if index is None:
            continue
        entry = index.entry(coordinates)
        if entry is not None:
            candidates.append((record, entry))
    if not candidates:
        raise NotFound(f"{coordinates.render()} not found in any synced catalog")
    if len(candidates) > 1:
        raise AmbiguousCoordinates(coordinates.render(), [r.name for r, _ in candidates])
    record, entry = candidates[0]
    file_path = content_root(record) / entry.relative_path
    manifest = parse_manifest(file_path.read_bytes())
    return ResolvedSolution(manifest, record.name, file_path, file_path.parent)


def resolve_solution(handle: CollectionHandle, ref: SolutionRef) -> tuple[SolutionManifest, str]:
    resolved = locate_solution(handle, ref)
    return resolved.manifest, resolved.provenance


# --- shared helpers --------------------------------------------------------------

def _coords_slug(coordinates: Coordinates) -> str:
    # ':' is not a legal filename character everywhere
    return coordinates.render().replace(":", "_")


def _log_path(handle: CollectionHandle, coordinates: Coordinates, stage: str) -> Path:
    stamp = file_stamp(utc_now())
    log_dir = handle.home / "logs" / _coords_slug(coordinates)
    log_dir.mkdir(parents=True, exist_ok=True)
    return log_dir / f"{stage}-{stamp}-{uuid.uuid4().hex[:6]}.log"


def _fresh_workspace(handle: CollectionHandle, label: str) -> Path:
    workspace = handle.home / "workspaces" / f"{label}-{file_stamp(utc_now())}-{uuid.uuid4().hex[:6]}"
    workspace.mkdir(parents=True)
    return workspace


def _installed_record(handle: CollectionHandle, coordinates: Coordinates) -> InstallRecord:
    record = handle.state.install(coordinates)
    if record is None or record.state is not InstallState.INSTALLED:
        raise NotInstalled(f"{coordinates.render()} is not installed")
    return record


def _installed_manifest(record: InstallRecord) -> SolutionManifest:
    return parse_manifest((Path(record.install_path) / SOLUTION_FILE_NAME).read_bytes())


def _default_bindings(manifest: SolutionManifest, solution_dir: Path, workspace: Path) -> dict[str, str]:
    """Reserved bindings plus declared defaults, rendered to strings.

    File and directory defaults resolve relative to the installed
    solution directory, so shipped sidecar data works out of the box.
    """
    bindings = {"solution_dir": str(solution_dir), "workspace": str(workspace)}
    for decl in manifest.args:
        if decl.default is None:
            continue
        if decl.kind in (ArgKind.FILE, ArgKind.DIRECTORY):
            default_path = Path(decl.default)
            if not default_path.is_absolute():
                default_path = solution_dir / default_path
            bindings[decl.name] = str(default_path)
        else:
            bindings[decl.name] = render_argument(decl.kind, decl.default)
    return bindings


def _render_hook(template, bindings: dict[str, str]) -> list[str]:
    for _, name in template.placeholders():
        if name not in bindings:
            raise MissingArgument(name)
    return template.render(bindings)


def _execute_hook(
    cfg: BackendConfig,
    env_name: str,
    argv: list[str],
    workdir: Path,
    log_path: Path,
) -> int:
    handle_obj = environment_handle(cfg, env_name)
    if handle_obj is None:
        handle_obj = EnvironmentHandle(env_name, cfg.backend_id, utc_now())
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with open(log_path, "a", encoding="utf-8") as sink:
        return execute_in_environment(cfg, handle_obj, argv, workdir, sink)


# --- install / uninstall ----------------------------------------------------------

def _copy_assets(resolved: ResolvedSolution, install_dir: Path) -> None:
    if install_dir.exists():
        shutil.rmtree(install_dir)
    install_dir.mkdir(parents=True)
    (install_dir / SOLUTION_FILE_NAME).write_bytes(resolved.file_path.read_bytes())
    if resolved.asset_dir is None:
        return
    for item in Path(resolved.asset_dir).iterdir():
        if item.name == SOLUTION_FILE_NAME:
            continue
        if item.is_dir():
            shutil.copytree(item, install_dir / item.name)
        else:
            shutil.copy2(item, install_dir / item.name)


def install(
    handle: CollectionHandle,
    ref: SolutionRef,
    cfg: BackendConfig,
    log_path: Path | None = None,
) -> InstallRecord:
    """Resolve, copy, create the environment, run the install hook.

    Any failure after the Installing transition lands the record in
    InstallFailed with the half-made environment removed and logs kept.
    """
    resolved = locate_solution(handle, ref)
    report = validate_manifest(resolved.manifest)
    if not report.ok:
        raise ValidationFailed(report)
    coordinates = resolved.manifest.coordinates
    with _solution_lock(coordinates):
        existing = handle.state.install(coordinates)
        if existing is not None and existing.state is not InstallState.INSTALL_FAILED:
            raise AlreadyInstalled(f"{coordinates.render()} is already installed ({existing.state.value})")
        env_name = derive_env_name(coordinates)
        install_dir = handle.home / "installs" / env_name
        handle.apply(
            transition_install,
            coordinates,
            InstallState.INSTALLING,
            catalog_name=resolved.provenance,
            environment_name=env_name,
            install_path=str(install_dir),
        )
        try:
            _copy_assets(resolved, install_dir)
            create_environment(cfg, env_name, resolved.manifest.environment)
            if resolved.manifest.hooks.install is not None:
                workspace = _fresh_workspace(handle, "install")
                bindings = _default_bindings(resolved.manifest, install_dir, workspace)
                argv = _render_hook(resolved.manifest.hooks.install, bindings)
                hook_log = log_path or _log_path(handle, coordinates, "install")
                status = _execute_hook(cfg, env_name, argv, install_dir, hook_log)
                if status != 0:
                    raise InstallHookFailed(coordinates.render(), status)
        except BaseException:
            try:
                handle_obj = environment_handle(cfg, env_name)
                if handle_obj is not None:
                    remove_environment(cfg, handle_obj)
            except SolcatError as cleanup_exc:
                logger.warning("cleanup of environment %s failed: %s", env_name, cleanup_exc)
            handle.apply(transition_install, coordinates, InstallState.INSTALL_FAILED)
            raise
        state = handle.apply(
            transition_install, coordinates, InstallState.INSTALLED, installed_at=utc_now()
        )
        record = state.install(coordinates)
        assert record is not None
        return record


def uninstall(
    handle: CollectionHandle,
    coordinates: Coordinates,
    cfg: BackendConfig,
    log_path: Path | None = None,
) -> None:
    """Run the optional uninstall hook, drop the environment, dir, and record.

    Hook and environment-removal failures are logged, never fatal: an
    uninstall always converges to the record being gone.
    """
    with _solution_lock(coordinates):
        record = _installed_record(handle, coordinates)
        manifest = _installed_manifest(record)
        handle.apply(transition_install, coordinates, InstallState.UNINSTALLING)
        if manifest.hooks.uninstall is not None:
            try:
                workspace = _fresh_workspace(handle, "uninstall")
                bindings = _default_bindings(manifest, Path(record.install_path), workspace)
                argv = _render_hook(manifest.hooks.uninstall, bindings)
                hook_log = log_path or _log_path(handle, coordinates, "uninstall")
                status = _execute_hook(cfg, record.environment_name, argv, Path(record.install_path), hook_log)
                if status != 0:
                    logger.warning("uninstall hook for %s exited %d", coordinates.render(), status)
            except SolcatError as exc:
                logger.warning("uninstall hook for %s failed: %s", coordinates.render(), exc)
        try:
            handle_obj = environment_handle(cfg, record.environment_name)
            if handle_obj is not None:
                remove_environment(cfg, handle_obj)
        except SolcatError as exc:
            logger.warning("environment removal for %s failed: %s", coordinates.render(), exc)
        shutil.rmtree(record.install_path, ignore_errors=True)
        handle.apply(transition_install, coordinates, None)


# --- test / run -------------------------------------------------------------------

def run_test(
    handle: CollectionHandle,
    coordinates: Coordinates,
    cfg: BackendConfig,
    log_path: Path | None = None,
) -> RunResult:
    """Execute the declared test hook; exit status 0 means pass."""
    with _solution_lock(coordinates):
        record = _installed_record(handle, coordinates)
        manifest = _installed_manifest(record)
        if manifest.hooks.test is None:
            raise NoTestHook(f"{coordinates.render()} declares no test hook")
        workspace = _fresh_workspace(handle, "test")
        bindings = _default_bindings(manifest, Path(record.install_path), workspace)
        argv = _render_hook(manifest.hooks.test, bindings)
        log_path = log_path or _log_path(handle, coordinates, "test")
        started = utc_now()
        status = _execute_hook(cfg, record.environment_name, argv, Path(record.install_path), log_path)
        duration = (utc_now() - started).total_seconds()
        return RunResult(coordinates, status, log_path, duration)


def _coerced_arguments(manifest: SolutionManifest, raw_args: dict[str, str], solution_dir: Path) -> dict[str, str]:
    """Apply defaults, coerce, and existence-check run arguments."""
    declared = {decl.name for decl in manifest.args}
    for name in raw_args:
        if name not in declared:
            raise UnknownArgument(name)
    rendered: dict[str, str] = {}
    for decl in manifest.args:
        raw = raw_args.get(decl.name)
        if raw is None:
            if decl.default is not None:
                if decl.kind in (ArgKind.FILE, ArgKind.DIRECTORY):
                    default_path = Path(decl.default)
                    if not default_path.is_absolute():
                        default_path = solution_dir / default_path
                    value = str(default_path)
                else:
                    value = decl.default
            elif decl.required:
                raise MissingArgument(decl.name)
            else:
                continue
        else:
            value = coerce_argument(decl, raw)
        if decl.kind in (ArgKind.FILE, ArgKind.DIRECTORY):
            if not Path(value).exists():
                raise FileArgumentMissing(decl.name, str(value))
        rendered[decl.name] = render_argument(decl.kind, value)
    return rendered


def run(
    handle: CollectionHandle,
    coordinates: Coordinates,
    raw_args: dict[str, str],
    cfg: BackendConfig,
    workspace: Path | None = None,
    log_path: Path | None = None,
) -> RunResult:
    """Coerce arguments, render the run hook, execute it, record the event."""
    with _solution_lock(coordinates):
        record = _installed_record(handle, coordinates)
        manifest = _installed_manifest(record)
        solution_dir = Path(record.install_path)
        arg_values = _coerced_arguments(manifest, raw_args, solution_dir)
        if workspace is None:
            workspace = _fresh_workspace(handle, "run")
        bindings = {
            "solution_dir": str(solution_dir),
            "workspace": str(workspace),
            **arg_values,
        }
        argv = _render_hook(manifest.hooks.run, bindings)
        log_path = log_path or _log_path(handle, coordinates, "run")
        started = utc_now()
        # hooks run from the installed solution directory (placeholders are
        # whole-token, so payload files are referenced relative to cwd);
        # scratch output goes wherever {{workspace}} points
        status = _execute_hook(cfg, record.environment_name, argv, solution_dir, log_path)
        finished = utc_now()
        event = RunEvent(
            coordinates=coordinates,
            started_at=started,
            finished_at=finished,
            exit_status=status,
            args_rendered=tuple(f"{name}={value}" for name, value in sorted(arg_values.items())),
        )
        handle.apply(record_run_event, event)
        return RunResult(coordinates, status, log_path, (finished - started).total_seconds())


# --- pipelines ---------------------------------------------------------------------

def run_pipeline(
    handle: CollectionHandle,
    pipeline: PipelineSpec,
    cfg: BackendConfig,
    log_path: Path | None = None,
) -> list[RunResult]:
    """Run steps strictly in sequence over one shared workspace.

    All steps must already be installed (checked before step 1 runs; no
    auto-install). The first nonzero exit halts the pipeline, and the
    result list covers executed steps only.
    """
    step_coords: list[Coordinates] = []
    for i, step in enumerate(pipeline.steps):
        if step.ref.coordinates is not None:
            coordinates = step.ref.coordinates
        else:
            coordinates = locate_solution(handle, step.ref).manifest.coordinates
        record = handle.state.install(coordinates)
        if record is None or record.state is not InstallState.INSTALLED:
            raise StepNotInstalled(i, coordinates.render())
        step_coords.append(coordinates)
    workspace = _fresh_workspace(handle, "pipeline")
    results: list[RunResult] = []
    for coordinates, step in zip(step_coords, pipeline.steps):
        result = run(handle, coordinates, step.args, cfg, workspace=workspace, log_path=log_path)
        results.append(result)
        if result.exit_status != 0:
            break
    return results
