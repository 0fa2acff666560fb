"""Command-line front end.

One subcommand per capability, stdout carries the command's data (JSON
with ``--json``), diagnostics go to stderr. Exit codes: 0 success, 1
domain error, 2 usage error; ``run`` and ``test`` pass the solution's
own exit status through as the process exit code.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .catalog import add_catalog, load_cached_index, remove_catalog, search, sync_catalog
from .collection import default_home, list_recent, open_collection
from .coords import Coordinates
from .deploy import LocalStubDepositClient, deploy_to_catalog, deposit_archive
from .environment import BackendConfig, external_config, plain_config
from .errors import InvalidSource, SolcatError, UnknownCatalog
from .jsonutil import canonical_bytes
from .lifecycle import (
    install,
    parse_pipeline_file,
    parse_ref,
    run,
    run_pipeline,
    run_test,
    uninstall,
)
from .manifest import parse_manifest
from .service import DEFAULT_PORT, DEFAULT_WORKERS, Service
from .timeutil import format_ts

SUBCOMMANDS = (
    "add-catalog",
    "remove-catalog",
    "sync",
    "search",
    "install",
    "uninstall",
    "test",
    "run",
    "run-pipeline",
    "deploy",
    "deposit",
    "recent",
    "serve",
    "version",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solcat",
        description="Manage catalogs of runnable scientific solutions.",
    )
    parser.add_argument("--home", type=Path, default=None, help="collection home (default: $SOLCAT_HOME)")
    parser.add_argument("--json", action="store_true", help="machine-readable stdout")
    parser.add_argument(
        "--backend", choices=("plain", "external"), default="external",
        help="environment backend (plain runs hooks on the host)",
    )
    parser.add_argument("--env-bin", default=None, help="environment manager executable")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("add-catalog", help="configure a catalog and sync it")
    p.add_argument("name")
    p.add_argument("source")

    p = sub.add_parser("remove-catalog", help="drop a catalog and its cache")
    p.add_argument("name")

    p = sub.add_parser("sync", help="resync one catalog, or all when omitted")
    p.add_argument("name", nargs="?")

    p = sub.add_parser("search", help="find solutions by coordinates, title, or tag")
    p.add_argument("query")

    p = sub.add_parser("install", help="install a solution by reference")
    p.add_argument("ref")

    p = sub.add_parser("uninstall", help="remove an installed solution")
    p.add_argument("coords")

    p = sub.add_parser("test", help="run a solution's test hook")
    p.add_argument("coords")

    p = sub.add_parser("run", help="run an installed solution")
    p.add_argument("ref")
    p.add_argument(
        "--arg", action="append", default=[], metavar="NAME=VALUE",
        help="argument value; repeatable",
    )

    p = sub.add_parser("run-pipeline", help="run solutions in sequence from a pipeline file")
    p.add_argument("file", type=Path)

    p = sub.add_parser("deploy", help="publish a solution file into a catalog clone")
    p.add_argument("file", type=Path)
    p.add_argument("catalog", help="configured directory-catalog name, or a clone path")

    p = sub.add_parser("deposit", help="deposit a solution archive and mint a DOI")
    p.add_argument("file", type=Path)

    p = sub.add_parser("recent", help="recently run solutions")
    p.add_argument("--limit", type=int, default=10)

    p = sub.add_parser("serve", help="start the local HTTP service and web UI")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--workers", type=int, default=DEFAULT_WORKERS)

    sub.add_parser("version", help="print the tool version")
    return parser


def _backend_config(args, home: Path) -> BackendConfig:
    state_dir = home / "envs"
    if args.backend == "plain":
        return plain_config(state_dir)
    return external_config(state_dir, executable=args.env_bin)


def _emit(args, payload, human: str | None = None) -> None:
    if args.json:
        sys.stdout.write(canonical_bytes(payload).decode("utf-8"))
    elif human is not None:
        print(human)


def _coords_arg(text: str) -> Coordinates:
    return Coordinates.parse(text)


def _parse_arg_pairs(pairs: list[str]) -> dict[str, str]:
    values = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise InvalidSource(f"--arg expects NAME=VALUE, got {pair!r}")
        values[name] = value
    return values


def _ref_to_installed_coords(handle, text: str) -> Coordinates:
    ref = parse_ref(text)
    if ref.coordinates is not None:
        return ref.coordinates
    from .lifecycle import locate_solution

    manifest = locate_solution(handle, ref).manifest
    return manifest.coordinates


def _run_result_payload(result) -> dict:
    return {
        "coordinates": result.coordinates.render(),
        "exit_status": result.exit_status,
        "log_path": str(result.log_path),
        "duration": result.duration,
    }


def _cmd_add_catalog(args, home: Path) -> int:
    with open_collection(home) as handle:
        record = add_catalog(handle, args.name, args.source)
        index = load_cached_index(record)
        entries = len(index.entries) if index else 0
    _emit(args, {"name": record.name, "kind": record.kind, "entries": entries},
          f"added catalog {record.name} ({record.kind}, {entries} solutions)")
    return 0


def _cmd_remove_catalog(args, home: Path) -> int:
    with open_collection(home) as handle:
        remove_catalog(handle, args.name)
    _emit(args, {"removed": args.name}, f"removed catalog {args.name}")
    return 0


def _cmd_sync(args, home: Path) -> int:
    with open_collection(home) as handle:
        records = handle.state.catalogs
        if args.name is not None:
            record = handle.state.catalog(args.name)
            if record is None:
                raise UnknownCatalog(f"no catalog named {args.name!r}")
            records = (record,)
        synced = {}
        for record in records:
            index = sync_catalog(record)
            synced[record.name] = len(index.entries)
    _emit(args, {"synced": synced},
          "\n".join(f"synced {name}: {count} solutions" for name, count in synced.items()) or "nothing to sync")
    return 0


def _cmd_search(args, home: Path) -> int:
    with open_collection(home) as handle:
        sources = []
        for record in handle.state.catalogs:
            index = load_cached_index(record)
            if index is not None:
                sources.append((record, index))
        hits = search(sources, args.query)
        rows = [{"catalog": name, "coordinates": e.coordinates.render()} for name, e in hits]
    _emit(args, {"results": rows},
          "\n".join(f"{row['catalog']}  {row['coordinates']}" for row in rows))
    return 0


def _cmd_install(args, home: Path) -> int:
    with open_collection(home) as handle:
        record = install(handle, parse_ref(args.ref), _backend_config(args, home))
    _emit(args, {"coordinates": record.coordinates.render(), "install_path": record.install_path},
          f"installed {record.coordinates.render()}")
    return 0


def _cmd_uninstall(args, home: Path) -> int:
    coords = _coords_arg(args.coords)
    with open_collection(home) as handle:
        uninstall(handle, coords, _backend_config(args, home))
    _emit(args, {"uninstalled": coords.render()}, f"uninstalled {coords.render()}")
    return 0


def _cmd_test(args, home: Path) -> int:
    coords = _coords_arg(args.coords)
    with open_collection(home) as handle:
        result = run_test(handle, coords, _backend_config(args, home))
    _emit(args, _run_result_payload(result),
          f"test exited {result.exit_status} (log: {result.log_path})")
    return result.exit_status


def _cmd_run(args, home: Path) -> int:
    with open_collection(home) as handle:
        coords = _ref_to_installed_coords(handle, args.ref)
        result = run(handle, coords, _parse_arg_pairs(args.arg), _backend_config(args, home))
    _emit(args, _run_result_payload(result),
          f"run exited {result.exit_status} (log: {result.log_path})")
    return result.exit_status


def _cmd_run_pipeline(args, home: Path) -> int:
    pipeline = parse_pipeline_file(args.file.read_bytes())
    with open_collection(home) as handle:
        results = run_pipeline(handle, pipeline, _backend_config(args, home))
    payload = {"steps": [_run_result_payload(r) for r in results]}
    _emit(args, payload,
          "\n".join(
              f"step {i + 1}: {r.coordinates.render()} exited {r.exit_status}"
              for i, r in enumerate(results)
          ))
    failed = [r for r in results if r.exit_status != 0]
    return failed[0].exit_status if failed else 0


def _cmd_deploy(args, home: Path) -> int:
    clone = Path(args.catalog)
    if not clone.is_dir():
        with open_collection(home) as handle:
            record = handle.state.catalog(args.catalog)
            if record is None or record.kind != "directory":
                raise InvalidSource(
                    f"{args.catalog!r} is neither a clone path nor a configured directory catalog"
                )
            clone = Path(record.source)
    entry = deploy_to_catalog(args.file, clone)
    _emit(args, {"coordinates": entry.coordinates.render(), "checksum": entry.checksum},
          f"deployed {entry.coordinates.render()}")
    return 0


def _cmd_deposit(args, home: Path) -> int:
    manifest = parse_manifest(args.file.read_bytes())
    receipt = deposit_archive(LocalStubDepositClient(home), args.file, manifest)
    _emit(args, {"doi": receipt.doi, "archive_url": receipt.archive_url, "checksum": receipt.checksum},
          f"deposited as {receipt.doi}")
    return 0


def _cmd_recent(args, home: Path) -> int:
    with open_collection(home) as handle:
        rows = [
            {
                "coordinates": coords.render(),
                "started_at": format_ts(event.started_at),
                "exit_status": event.exit_status,
            }
            for coords, event in list_recent(handle.state, args.limit)
        ]
    _emit(args, {"recent": rows},
          "\n".join(f"{r['started_at']}  {r['coordinates']}  exit={r['exit_status']}" for r in rows))
    return 0


def _cmd_serve(args, home: Path) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    static_dir = _default_static_dir()
    service = Service(home, _backend_config(args, home), workers=args.workers, static_dir=static_dir)
    service.serve(port=args.port, block=True)
    return 0


def _default_static_dir() -> Path | None:
    candidate = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def _cmd_version(args, home: Path) -> int:
    _emit(args, {"version": __version__}, __version__)
    return 0


_HANDLERS = {
    "add-catalog": _cmd_add_catalog,
    "remove-catalog": _cmd_remove_catalog,
    "sync": _cmd_sync,
    "search": _cmd_search,
    "install": _cmd_install,
    "uninstall": _cmd_uninstall,
    "test": _cmd_test,
    "run": _cmd_run,
    "run-pipeline": _cmd_run_pipeline,
    "deploy": _cmd_deploy,
    "deposit": _cmd_deposit,
    "recent": _cmd_recent,
    "serve": _cmd_serve,
    "version": _cmd_version,
}


def dispatch(argv: list[str]) -> int:
    """Parse argv and execute; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    home = args.home or default_home()
    try:
        return _HANDLERS[args.command](args, home)
    except SolcatError as exc:
        if args.json:
            line = json.dumps({"error": exc.kind, "message": str(exc)})
        else:
            line = f"solcat: {exc.kind}: {exc}"
        print(line, file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"solcat: InvalidValue: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
