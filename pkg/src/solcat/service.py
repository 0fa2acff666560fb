"""Local HTTP+JSON service: collection, catalog, and lifecycle operations
exposed as asynchronous tasks for the web UI and other clients.

The service binds to loopback only and shares the collection lock
discipline with the CLI: it owns the exclusive collection handle while
serving, and a fixed-size worker pool executes tasks under the same
per-solution and per-catalog locks the direct API uses. Clients poll:
task state is monotone (Pending -> Running -> Succeeded/Failed) and the
append-only task log is readable in byte-offset segments.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import queue
import re
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlparse

from . import __version__
from .catalog import add_catalog, load_cached_index, remove_catalog, search, sync_catalog
from .collection import CollectionHandle, InstallState, list_recent, open_collection
from .coords import Coordinates
from .deploy import LocalStubDepositClient, deploy_to_catalog, deposit_archive
from .environment import BackendConfig
from .errors import (
    AlreadyInstalled,
    AmbiguousCoordinates,
    Busy,
    CatalogBusy,
    CoercionError,
    CorruptState,
    DeployFailed,
    DepositFailed,
    DuplicateCatalogName,
    FetchFailure,
    FileArgumentMissing,
    InvalidSource,
    LockHeld,
    MalformedDocument,
    MissingArgument,
    NegativeOffset,
    NoTestHook,
    NotACatalog,
    NotFound,
    NotInstalled,
    SchemaViolation,
    SolcatError,
    UnknownArgument,
    UnknownCatalog,
    UnknownSolution,
    UnknownTask,
    ValidationFailed,
    VersionExists,
)
from .lifecycle import (
    install,
    locate_solution,
    parse_pipeline_file,
    parse_ref,
    run,
    run_pipeline,
    run_test,
    uninstall,
)
from .manifest import manifest_to_dict, parse_manifest
from .timeutil import format_ts, utc_now

logger = logging.getLogger(__name__)

DEFAULT_PORT = 7634
DEFAULT_WORKERS = 2
MAX_LOG_SEGMENT = 1 << 20


class TaskState:
    PENDING = "pending"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"


_TERMINAL = (TaskState.SUCCEEDED, TaskState.FAILED)
_ORDER = [TaskState.PENDING, TaskState.RUNNING, TaskState.SUCCEEDED, TaskState.FAILED]


@dataclass(frozen=True)
class TaskRecord:
    id: str
    kind: str  # sync | install | uninstall | test | run | pipeline | deploy
    subject: str  # coordinates or catalog name
    state: str
    log_path: str
    created_at: datetime
    exit_status: int | None = None
    finished_at: datetime | None = None


def task_to_dict(task: TaskRecord) -> dict:
    return {
        "id": task.id,
        "kind": task.kind,
        "subject": task.subject,
        "state": task.state,
        "exit_status": task.exit_status,
        "log_path": task.log_path,
        "created_at": format_ts(task.created_at),
        "finished_at": format_ts(task.finished_at) if task.finished_at else None,
    }


class TaskRegistry:
    """Thread-safe task table enforcing monotone state transitions."""

    def __init__(self, log_dir: Path):
        self._log_dir = Path(log_dir)
        self._log_dir.mkdir(parents=True, exist_ok=True)
        self._tasks: dict[str, TaskRecord] = {}
        self._mutex = threading.Lock()

    def submit(self, kind: str, subject: str) -> TaskRecord:
        """Create a Pending record; one active task per subject at a time."""
        with self._mutex:
            for task in self._tasks.values():
                if task.subject == subject and task.state not in _TERMINAL:
                    raise Busy(f"a {task.kind} task is already active for {subject}")
            task_id = uuid.uuid4().hex
            log_path = self._log_dir / f"{task_id}.log"
            log_path.touch()
            record = TaskRecord(
                id=task_id,
                kind=kind,
                subject=subject,
                state=TaskState.PENDING,
                log_path=str(log_path),
                created_at=utc_now(),
            )
            self._tasks[task_id] = record
            return record

    def get(self, task_id: str) -> TaskRecord:
        with self._mutex:
            task = self._tasks.get(task_id)
        if task is None:
            raise UnknownTask(f"no task with id {task_id}")
        return task

    def advance(self, task_id: str, state: str, exit_status: int | None = None) -> TaskRecord:
        with self._mutex:
            task = self._tasks[task_id]
            if _ORDER.index(state) < _ORDER.index(task.state) or task.state in _TERMINAL:
                raise RuntimeError(f"task {task_id}: illegal {task.state} -> {state}")
            task = replace(
                task,
                state=state,
                exit_status=exit_status if exit_status is not None else task.exit_status,
                finished_at=utc_now() if state in _TERMINAL else None,
            )
            self._tasks[task_id] = task
            return task

    def snapshot(self) -> list[TaskRecord]:
        with self._mutex:
            return sorted(self._tasks.values(), key=lambda t: t.created_at, reverse=True)


def read_log_segment(task: TaskRecord, offset: int, max_len: int) -> tuple[bytes, int]:
    """Bytes [offset, offset+max_len) of the task log, plus the next offset.

    Offsets beyond the current end return empty with the offset
    unchanged, so successive polls reconstruct the log byte-exactly.
    """
    if offset < 0:
        raise NegativeOffset(f"offset must be non-negative, got {offset}")
    max_len = max(0, min(max_len, MAX_LOG_SEGMENT))
    with open(task.log_path, "rb") as handle:
        handle.seek(offset)
        data = handle.read(max_len)
    return data, offset + len(data)


class _TaskLogWriter:
    """Append-only text sink for one task's log file."""

    def __init__(self, path: str):
        self.path = Path(path)
        self._mutex = threading.Lock()

    def write(self, text: str) -> None:
        with self._mutex:
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(text)

    def line(self, text: str) -> None:
        self.write(text + "\n")


_ERROR_STATUS = {
    NotFound: 404,
    UnknownCatalog: 404,
    UnknownSolution: 404,
    NotInstalled: 404,
    UnknownTask: 404,
    DuplicateCatalogName: 409,
    CatalogBusy: 409,
    Busy: 409,
    AlreadyInstalled: 409,
    AmbiguousCoordinates: 409,
    VersionExists: 409,
    LockHeld: 409,
    InvalidSource: 400,
    SchemaViolation: 400,
    MalformedDocument: 400,
    CoercionError: 400,
    MissingArgument: 400,
    UnknownArgument: 400,
    FileArgumentMissing: 400,
    ValidationFailed: 400,
    NoTestHook: 400,
    NotACatalog: 400,
    FetchFailure: 502,
    DeployFailed: 502,
    DepositFailed: 502,
    CorruptState: 500,
    NegativeOffset: 416,
}


def error_status(exc: SolcatError) -> int:
    for cls in type(exc).__mro__:
        if cls in _ERROR_STATUS:
            return _ERROR_STATUS[cls]
    return 500


class Service:
    """Owns the collection handle, task queue, and worker pool."""

    def __init__(
        self,
        home: Path,
        cfg: BackendConfig,
        workers: int = DEFAULT_WORKERS,
        static_dir: Path | None = None,
    ):
        self.home = Path(home)
        self.cfg = cfg
        self.static_dir = Path(static_dir) if static_dir else None
        self.handle: CollectionHandle = open_collection(home)
        self.tasks = TaskRegistry(self.home / "logs" / "tasks")
        self._queue: queue.Queue = queue.Queue()
        self._workers = [
            threading.Thread(target=self._worker_loop, name=f"solcat-worker-{i}", daemon=True)
            for i in range(max(1, workers))
        ]
        self._server: ThreadingHTTPServer | None = None
        for worker in self._workers:
            worker.start()

    # --- task machinery -----------------------------------------------------

    def _worker_loop(self) -> None:
        while True:
            item = self._queue.get()
            if item is None:
                return
            task_id, runner = item
            log = _TaskLogWriter(self.tasks.get(task_id).log_path)
            self.tasks.advance(task_id, TaskState.RUNNING)
            try:
                exit_status = runner(log)
            except SolcatError as exc:
                log.line(f"error: {exc.kind}: {exc}")
                self.tasks.advance(task_id, TaskState.FAILED)
            except Exception as exc:  # defensive: tasks must never kill workers
                logger.exception("task %s crashed", task_id)
                log.line(f"error: internal: {exc}")
                self.tasks.advance(task_id, TaskState.FAILED)
            else:
                state = TaskState.SUCCEEDED if not exit_status else TaskState.FAILED
                self.tasks.advance(task_id, state, exit_status=exit_status or 0)
            finally:
                self._queue.task_done()

    def _enqueue(self, kind: str, subject: str, runner) -> TaskRecord:
        record = self.tasks.submit(kind, subject)
        self._queue.put((record.id, runner))
        return record

    # --- endpoint implementations --------------------------------------------

    def _catalog_payload(self) -> dict:
        catalogs = []
        for record in self.handle.state.catalogs:
            index = load_cached_index(record)
            catalogs.append(
                {
                    "name": record.name,
                    "source": record.source,
                    "kind": record.kind,
                    "cache_path": record.cache_path,
                    "entries": len(index.entries) if index else 0,
                }
            )
        return {"catalogs": catalogs}

    def _search_payload(self, query: str) -> dict:
        sources = []
        for record in self.handle.state.catalogs:
            index = load_cached_index(record)
            if index is not None:
                sources.append((record, index))
        results = []
        installs = {r.coordinates.render(): r for r in self.handle.state.installs}
        for catalog_name, entry in search(sources, query):
            rendered = entry.coordinates.render()
            install_record = installs.get(rendered)
            item = {
                "catalog": catalog_name,
                "coordinates": rendered,
                "checksum": entry.checksum,
                "installed": install_record.state.value if install_record else None,
            }
            record = self.handle.state.catalog(catalog_name)
            if record is not None:
                path = Path(record.cache_path) / entry.relative_path
                try:
                    manifest = parse_manifest(path.read_bytes())
                    item["title"] = manifest.title
                    item["tags"] = list(manifest.tags)
                    item["description"] = manifest.description
                except (OSError, SolcatError):
                    pass
            results.append(item)
        return {"results": results}

    def _solution_detail(self, coords_text: str) -> dict:
        ref = parse_ref(coords_text)
        install_record = None
        if ref.coordinates is not None:
            install_record = self.handle.state.install(ref.coordinates)
        try:
            resolved = locate_solution(self.handle, ref)
            manifest, provenance = resolved.manifest, resolved.provenance
        except NotFound:
            if install_record is None:
                raise
            # orphaned installs stay inspectable from the installed copy
            path = Path(install_record.install_path) / "solution.json"
            manifest = parse_manifest(path.read_bytes())
            provenance = install_record.catalog_name
        payload = {
            "manifest": manifest_to_dict(manifest),
            "provenance": provenance,
            "install": None,
        }
        if install_record is not None:
            payload["install"] = {
                "state": install_record.state.value,
                "catalog_name": install_record.catalog_name,
                "environment_name": install_record.environment_name,
                "install_path": install_record.install_path,
                "installed_at": format_ts(install_record.installed_at)
                if install_record.installed_at
                else None,
                "orphaned": install_record.orphaned,
            }
        return payload

    def _recent_payload(self) -> dict:
        recent = []
        for coordinates, event in list_recent(self.handle.state, 25):
            recent.append(
                {
                    "coordinates": coordinates.render(),
                    "started_at": format_ts(event.started_at),
                    "finished_at": format_ts(event.finished_at) if event.finished_at else None,
                    "exit_status": event.exit_status,
                    "args_rendered": list(event.args_rendered),
                }
            )
        return {"recent": recent}

    def _submit_sync(self, name: str) -> TaskRecord:
        record = self.handle.state.catalog(name)
        if record is None:
            raise UnknownCatalog(f"no catalog named {name!r}")

        def runner(log: _TaskLogWriter) -> int:
            log.line(f"syncing catalog {name} from {record.source}")
            warnings: list = []
            index = sync_catalog(record, warnings)
            for finding in warnings:
                log.line(f"warning: {finding.code} at {finding.path}: {finding.message}")
            log.line(f"synced {len(index.entries)} entries")
            return 0

        return self._enqueue("sync", f"catalog:{name}", runner)

    def _submit_install(self, coords_text: str) -> TaskRecord:
        ref = parse_ref(coords_text)
        locate_solution(self.handle, ref)  # 404/409 now, not at execution time

        def runner(log: _TaskLogWriter) -> int:
            log.line(f"installing {coords_text}")
            record = install(self.handle, ref, self.cfg, log_path=log.path)
            log.line(f"installed {record.coordinates.render()} into {record.install_path}")
            return 0

        return self._enqueue("install", coords_text, runner)

    def _require_installed(self, coords_text: str) -> Coordinates:
        ref = parse_ref(coords_text)
        if ref.coordinates is None:
            raise NotInstalled(f"{coords_text} is not coordinates")
        record = self.handle.state.install(ref.coordinates)
        if record is None or record.state is not InstallState.INSTALLED:
            raise NotInstalled(f"{coords_text} is not installed")
        return ref.coordinates

    def _submit_uninstall(self, coords_text: str) -> TaskRecord:
        coordinates = self._require_installed(coords_text)

        def runner(log: _TaskLogWriter) -> int:
            log.line(f"uninstalling {coords_text}")
            uninstall(self.handle, coordinates, self.cfg)
            log.line("uninstalled")
            return 0

        return self._enqueue("uninstall", coords_text, runner)

    def _submit_test(self, coords_text: str) -> TaskRecord:
        coordinates = self._require_installed(coords_text)

        def runner(log: _TaskLogWriter) -> int:
            result = run_test(self.handle, coordinates, self.cfg, log_path=log.path)
            log.line(f"test exited {result.exit_status}")
            return result.exit_status

        return self._enqueue("test", coords_text, runner)

    def _submit_run(self, coords_text: str, args: dict) -> TaskRecord:
        coordinates = self._require_installed(coords_text)
        if not isinstance(args, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in args.items()
        ):
            raise SchemaViolation("args", "args must map names to strings")

        def runner(log: _TaskLogWriter) -> int:
            result = run(self.handle, coordinates, args, self.cfg, log_path=log.path)
            log.line(f"run exited {result.exit_status}")
            return result.exit_status

        return self._enqueue("run", coords_text, runner)

    def _submit_pipeline(self, body: bytes) -> TaskRecord:
        pipeline = parse_pipeline_file(body)
        subject = f"pipeline:{uuid.uuid4().hex[:8]}"

        def runner(log: _TaskLogWriter) -> int:
            results = run_pipeline(self.handle, pipeline, self.cfg, log_path=log.path)
            for i, result in enumerate(results):
                log.line(f"step {i + 1}: {result.coordinates.render()} exited {result.exit_status}")
            failed = [r for r in results if r.exit_status != 0]
            return failed[0].exit_status if failed else 0

        return self._enqueue("pipeline", subject, runner)

    def _submit_deploy(self, body: dict) -> TaskRecord:
        solution_file = body.get("solution_file")
        catalog_clone = body.get("catalog_clone")
        if not isinstance(solution_file, str) or not isinstance(catalog_clone, str):
            raise SchemaViolation("solution_file", "deploy needs solution_file and catalog_clone paths")
        manifest = parse_manifest(Path(solution_file).read_bytes())
        subject = manifest.coordinates.render()

        def runner(log: _TaskLogWriter) -> int:
            entry = deploy_to_catalog(Path(solution_file), Path(catalog_clone))
            log.line(f"deployed {entry.coordinates.render()} ({entry.checksum})")
            return 0

        return self._enqueue("deploy", subject, runner)

    def _deposit(self, body: dict) -> dict:
        solution_file = body.get("solution_file")
        if not isinstance(solution_file, str):
            raise SchemaViolation("solution_file", "deposit needs a solution_file path")
        manifest = parse_manifest(Path(solution_file).read_bytes())
        client = LocalStubDepositClient(self.home)
        receipt = deposit_archive(client, Path(solution_file), manifest)
        return {
            "doi": receipt.doi,
            "archive_url": receipt.archive_url,
            "deposited_at": format_ts(receipt.deposited_at),
            "checksum": receipt.checksum,
        }

    # --- http ------------------------------------------------------------------

    def routes(self):
        return _ROUTES

    def serve(self, port: int = DEFAULT_PORT, block: bool = True) -> int:
        """Bind loopback and serve; returns the bound port."""
        self._server = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
        self._server.daemon_threads = True
        self._server.service = self  # type: ignore[attr-defined]
        bound = self._server.server_address[1]
        logger.info("serving on http://127.0.0.1:%d", bound)
        if block:
            try:
                self._server.serve_forever()
            except KeyboardInterrupt:
                pass
            finally:
                self.close()
        else:
            threading.Thread(target=self._server.serve_forever, daemon=True).start()
        return bound

    def close(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
        for _ in self._workers:
            self._queue.put(None)
        for worker in self._workers:
            worker.join(timeout=5)
        self._workers = []
        self.handle.close()


# Route table: (method, pattern) -> handler(service, match, query, body_bytes)
# Kept declarative so the CLI parity test can enumerate every endpoint.

def _json_body(body: bytes) -> dict:
    if not body:
        return {}
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise MalformedDocument(f"request body is not JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedDocument("request body must be a JSON object")
    return obj


_ROUTES: list[tuple[str, str, object]] = []


def route(method: str, pattern: str):
    def decorate(fn):
        _ROUTES.append((method, pattern, fn))
        return fn

    return decorate


@route("GET", r"^/api/version$")
def _ep_version(service, match, query, body):
    return 200, {"version": __version__}


@route("GET", r"^/api/catalogs$")
def _ep_catalogs(service, match, query, body):
    return 200, service._catalog_payload()


@route("POST", r"^/api/catalogs$")
def _ep_add_catalog(service, match, query, body):
    obj = _json_body(body)
    name, source = obj.get("name"), obj.get("source")
    if not isinstance(name, str) or not isinstance(source, str):
        raise SchemaViolation("name", "adding a catalog needs name and source strings")
    record = add_catalog(service.handle, name, source)
    index = load_cached_index(record)
    return 201, {
        "catalog": {
            "name": record.name,
            "source": record.source,
            "kind": record.kind,
            "entries": len(index.entries) if index else 0,
        }
    }


@route("DELETE", r"^/api/catalogs/(?P<name>[^/]+)$")
def _ep_remove_catalog(service, match, query, body):
    remove_catalog(service.handle, unquote(match["name"]))
    return 200, {"removed": unquote(match["name"])}


@route("POST", r"^/api/catalogs/(?P<name>[^/]+)/sync$")
def _ep_sync(service, match, query, body):
    task = service._submit_sync(unquote(match["name"]))
    return 202, {"task": task_to_dict(task)}


@route("GET", r"^/api/solutions$")
def _ep_search(service, match, query, body):
    return 200, service._search_payload(query.get("query", [""])[0])


@route("GET", r"^/api/solutions/(?P<coords>[^/]+)$")
def _ep_solution_detail(service, match, query, body):
    return 200, service._solution_detail(unquote(match["coords"]))


@route("POST", r"^/api/solutions/(?P<coords>[^/]+)/install$")
def _ep_install(service, match, query, body):
    task = service._submit_install(unquote(match["coords"]))
    return 202, {"task": task_to_dict(task)}


@route("POST", r"^/api/solutions/(?P<coords>[^/]+)/uninstall$")
def _ep_uninstall(service, match, query, body):
    task = service._submit_uninstall(unquote(match["coords"]))
    return 202, {"task": task_to_dict(task)}


@route("POST", r"^/api/solutions/(?P<coords>[^/]+)/test$")
def _ep_test(service, match, query, body):
    task = service._submit_test(unquote(match["coords"]))
    return 202, {"task": task_to_dict(task)}


@route("POST", r"^/api/solutions/(?P<coords>[^/]+)/run$")
def _ep_run(service, match, query, body):
    obj = _json_body(body)
    task = service._submit_run(unquote(match["coords"]), obj.get("args", {}))
    return 202, {"task": task_to_dict(task)}


@route("POST", r"^/api/pipelines/run$")
def _ep_pipeline(service, match, query, body):
    task = service._submit_pipeline(body)
    return 202, {"task": task_to_dict(task)}


@route("POST", r"^/api/deploy$")
def _ep_deploy(service, match, query, body):
    task = service._submit_deploy(_json_body(body))
    return 202, {"task": task_to_dict(task)}


@route("POST", r"^/api/deposit$")
def _ep_deposit(service, match, query, body):
    return 200, {"receipt": service._deposit(_json_body(body))}


@route("GET", r"^/api/recent$")
def _ep_recent(service, match, query, body):
    return 200, service._recent_payload()


@route("GET", r"^/api/tasks/(?P<id>[0-9a-f]+)$")
def _ep_task(service, match, query, body):
    return 200, {"task": task_to_dict(service.tasks.get(match["id"]))}


@route("GET", r"^/api/tasks/(?P<id>[0-9a-f]+)/log$")
def _ep_task_log(service, match, query, body):
    task = service.tasks.get(match["id"])
    try:
        offset = int(query.get("offset", ["0"])[0])
        max_len = int(query.get("max_len", [str(MAX_LOG_SEGMENT)])[0])
    except ValueError:
        raise SchemaViolation("offset", "offset and max_len must be integers") from None
    data, next_offset = read_log_segment(task, offset, max_len)
    return 200, {
        "data_b64": base64.b64encode(data).decode("ascii"),
        "next_offset": next_offset,
        "eof": task.state in _TERMINAL and not data,
    }


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def service(self) -> Service:
        return self.server.service  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # quiet by default
        logger.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _dispatch(self, method: str) -> None:
        parsed = urlparse(self.path)
        query = parse_qs(parsed.query)
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        for route_method, pattern, handler in _ROUTES:
            if route_method != method:
                continue
            match = re.match(pattern, parsed.path)
            if match is None:
                continue
            try:
                status, payload = handler(self.service, match.groupdict(), query, body)
            except SolcatError as exc:
                self._send_json(error_status(exc), {"error": exc.kind, "message": str(exc)})
            except Exception as exc:
                logger.exception("handler for %s failed", parsed.path)
                self._send_json(500, {"error": "Internal", "message": str(exc)})
            else:
                self._send_json(status, payload)
            return
        if method == "GET" and self._serve_static(parsed.path):
            return
        self._send_json(404, {"error": "NoSuchEndpoint", "message": parsed.path})

    def _serve_static(self, path: str) -> bool:
        static_dir = self.service.static_dir
        if static_dir is None or not static_dir.is_dir():
            return False
        relative = path.lstrip("/") or "index.html"
        candidate = (static_dir / relative).resolve()
        base = str(static_dir.resolve())
        if not str(candidate).startswith(base + os.sep) or not candidate.is_file():
            return False
        content_types = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript; charset=utf-8",
            ".css": "text/css; charset=utf-8",
            ".json": "application/json",
            ".svg": "image/svg+xml",
        }
        data = candidate.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", content_types.get(candidate.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)
        return True

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_DELETE(self):
        self._dispatch("DELETE")
