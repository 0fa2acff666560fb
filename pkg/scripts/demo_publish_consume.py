#!/usr/bin/env python3
"""End-to-end walkthrough on a throwaway workspace.

Publishes a small solution into a curated catalog, then plays the
consumer side: add the catalog, sync, install, test, run, check the run
history, and finally mint a DOI for the solution and resolve it back.
Everything runs with the plain backend in local directories; no network,
no conda.

Usage: python3 scripts/demo_publish_consume.py
"""

import sys
import tempfile
from pathlib import Path

from solcat.catalog import add_catalog, load_cached_index
from solcat.collection import list_recent, open_collection
from solcat.coords import Coordinates
from solcat.deploy import LocalStubDepositClient, deploy_to_catalog, deposit_archive
from solcat.environment import plain_config
from solcat.jsonutil import canonical_bytes
from solcat.lifecycle import install, parse_ref, resolve_solution, run, run_test, uninstall
from solcat.manifest import parse_manifest

SOLUTION = {
    "coordinates": "org.example:histogram:1.0.0",
    "title": "Histogram of a text file's line lengths",
    "description": "Counts line lengths and writes a tiny ASCII histogram.",
    "license": "MIT",
    "tags": ["demo", "text"],
    "args": [
        {"name": "input", "kind": "file", "required": True, "description": "text file to analyze"},
        {"name": "bins", "kind": "integer", "default": 5, "description": "number of bins"},
    ],
    "environment": {"channels": [], "dependencies": []},
    "hooks": {
        "run": [
            sys.executable,
            "-c",
            (
                "import sys, pathlib\n"
                "lines = pathlib.Path(sys.argv[1]).read_text().splitlines()\n"
                "bins = int(sys.argv[2])\n"
                "lengths = [len(l) for l in lines] or [0]\n"
                "top = max(lengths)\n"
                "hist = [0] * bins\n"
                "for n in lengths:\n"
                "    hist[min(bins - 1, n * bins // (top + 1))] += 1\n"
                "out = pathlib.Path(sys.argv[3]) / 'histogram.txt'\n"
                "out.write_text('\\n'.join('#' * c for c in hist) + '\\n')\n"
                "print(f'wrote {out}')\n"
            ),
            "{{input}}",
            "{{bins}}",
            "{{workspace}}",
        ],
        "test": [sys.executable, "-c", "print('self-test ok')"],
    },
}


def say(text: str) -> None:
    print(f"--- {text}")


def main() -> None:
    with tempfile.TemporaryDirectory(prefix="solcat-demo-") as workdir:
        work = Path(workdir)
        say(f"workspace: {work}")

        # author side: write the solution and publish it into a curated catalog
        author_dir = work / "author"
        author_dir.mkdir()
        solution_file = author_dir / "solution.json"
        solution_file.write_bytes(canonical_bytes(SOLUTION))
        clone = work / "curated-catalog"
        clone.mkdir()
        (clone / "catalog.json").write_bytes(canonical_bytes({"name": "curated", "schema_version": "1.0.0"}))
        entry = deploy_to_catalog(solution_file, clone)
        say(f"deployed {entry.coordinates.render()} (checksum {entry.checksum[:12]}…)")

        # consumer side
        home = work / "home"
        coords = Coordinates.parse(SOLUTION["coordinates"])
        with open_collection(home) as handle:
            cfg = plain_config(home / "envs")
            record = add_catalog(handle, "curated", str(clone))
            index = load_cached_index(record)
            say(f"added catalog 'curated' with {len(index.entries)} solution(s)")

            install(handle, parse_ref(SOLUTION["coordinates"]), cfg)
            say(f"installed {coords.render()}")

            result = run_test(handle, coords, cfg)
            say(f"test hook exited {result.exit_status}")

            sample = work / "sample.txt"
            sample.write_text("short\nmedium line\na much longer line of text\n")
            result = run(handle, coords, {"input": str(sample), "bins": "3"}, cfg)
            say(f"run exited {result.exit_status}; log at {result.log_path}")
            workspace = sorted((home / "workspaces").glob("run-*"))[-1]
            print((workspace / "histogram.txt").read_text(), end="")

            recent = list_recent(handle.state, 5)
            say(f"recent runs: {[c.render() for c, _ in recent]}")

            receipt = deposit_archive(
                LocalStubDepositClient(home), solution_file, parse_manifest(solution_file.read_bytes())
            )
            say(f"deposited as {receipt.doi}")
            manifest, provenance = resolve_solution(handle, parse_ref(receipt.doi))
            say(f"resolved {receipt.doi} -> {manifest.coordinates.render()} ({provenance})")

            uninstall(handle, coords, cfg)
            say("uninstalled; demo complete")


if __name__ == "__main__":
    main()
