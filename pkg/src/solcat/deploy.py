"""Publishing: deploy solutions into catalogs, deposit archives, mint DOIs.

Deploying copies a validated solution file into a catalog clone's
canonical layout; published versions are immutable and can never be
overwritten. Depositing hands the file to a deposit client, an interface
with exactly two methods (``deposit`` and ``resolve``). The bundled
client is a local stub that stores files under the collection home and
mints content-addressed DOIs under the 10.5072 test registrant prefix,
so minted identifiers can never collide with real registrations.
"""

from __future__ import annotations

import os
import shutil
import subprocess
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .catalog import (
    CATALOG_FILE_NAME,
    INDEX_FILE_NAME,
    IndexEntry,
    VCS_BIN_VAR,
    build_index,
    index_from_dict,
    serialize_index,
)
from .errors import (
    DeployFailed,
    DepositFailed,
    NotACatalog,
    NotFound,
    ValidationFailed,
    VersionExists,
)
from .hashing import compute_checksum
from .jsonutil import atomic_write_bytes, atomic_write_json, load_json_file
from .manifest import SOLUTION_FILE_NAME, SolutionManifest, parse_manifest, validate_manifest
from .timeutil import format_ts, utc_now

STUB_DOI_PREFIX = "10.5072/solcat."


@dataclass(frozen=True)
class DepositReceipt:
    doi: str
    archive_url: str
    deposited_at: datetime
    checksum: str


def _parse_and_validate(solution_file: Path) -> tuple[bytes, SolutionManifest]:
    data = Path(solution_file).read_bytes()
    manifest = parse_manifest(data)
    report = validate_manifest(manifest)
    if not report.ok:
        raise ValidationFailed(report)
    return data, manifest


def _commit_clone(clone: Path, message: str) -> None:
    vcs = os.environ.get(VCS_BIN_VAR, "git")
    for argv in (
        [vcs, "-C", str(clone), "add", "--all"],
        [vcs, "-C", str(clone), "commit", "--quiet", "-m", message],
    ):
        result = subprocess.run(argv, capture_output=True, text=True)
        if result.returncode != 0:
            raise DeployFailed(f"{' '.join(argv[:4])} failed: {result.stderr.strip()}")


def deploy_to_catalog(solution_file: Path, catalog_clone: Path) -> IndexEntry:
    """Publish one solution into a catalog clone.

    The file lands at ``solutions/<group>/<name>/<version>/solution.json``
    along with any sidecar assets next to it (payload scripts, data);
    existing coordinates are immutable and rejected. For git clones the
    change is committed with message ``deploy <coords>``.
    """
    clone = Path(catalog_clone)
    catalog_file = clone / CATALOG_FILE_NAME
    if not catalog_file.is_file():
        raise NotACatalog(f"{clone} has no {CATALOG_FILE_NAME}")
    data, manifest = _parse_and_validate(solution_file)
    coords = manifest.coordinates
    target = clone / "solutions" / coords.group / coords.name / coords.version.render() / SOLUTION_FILE_NAME
    if target.exists():
        raise VersionExists(f"{coords.render()} is already published; versions are immutable")
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(data)
    for sidecar in Path(solution_file).resolve().parent.iterdir():
        if sidecar.name == SOLUTION_FILE_NAME:
            continue
        if sidecar.is_dir():
            shutil.copytree(sidecar, target.parent / sidecar.name)
        else:
            shutil.copy2(sidecar, target.parent / sidecar.name)

    previous = None
    index_path = clone / INDEX_FILE_NAME
    if index_path.exists():
        previous = index_from_dict(load_json_file(index_path))
    catalog_name = load_json_file(catalog_file).get("name", clone.name)
    index = build_index(clone, catalog_name, previous)
    atomic_write_bytes(index_path, serialize_index(index))

    if (clone / ".git").exists():
        _commit_clone(clone, f"deploy {coords.render()}")
    entry = index.entry(coords)
    assert entry is not None
    return entry


class DepositClient:
    """Interface for archive deposit backends."""

    def deposit(self, solution_file: Path, metadata: SolutionManifest) -> DepositReceipt:
        raise NotImplementedError

    def resolve(self, doi: str) -> str:
        """Map a DOI minted by this client back to a fetchable location."""
        raise NotImplementedError


class LocalStubDepositClient(DepositClient):
    """Offline deposit client storing archives under the collection home.

    DOIs are a pure function of the file bytes:
    ``10.5072/solcat.`` + the first 8 hex chars of the SHA-256 checksum.
    """

    def __init__(self, home: Path):
        self.deposits_dir = Path(home) / "deposits"

    @property
    def resolver_path(self) -> Path:
        return self.deposits_dir / "resolver.json"

    def _resolver_table(self) -> dict:
        if not self.resolver_path.exists():
            return {}
        return load_json_file(self.resolver_path)

    def deposit(self, solution_file: Path, metadata: SolutionManifest) -> DepositReceipt:
        data = Path(solution_file).read_bytes()
        checksum = compute_checksum(data)
        suffix = f"solcat.{checksum[:8]}"
        doi = f"10.5072/{suffix}"
        archive = self.deposits_dir / suffix / SOLUTION_FILE_NAME
        try:
            archive.parent.mkdir(parents=True, exist_ok=True)
            archive.write_bytes(data)
            receipt = DepositReceipt(doi, archive.resolve().as_uri(), utc_now(), checksum)
            atomic_write_json(
                archive.parent / "receipt.json",
                {
                    "doi": doi,
                    "checksum": checksum,
                    "deposited_at": format_ts(receipt.deposited_at),
                    "coordinates": metadata.coordinates.render(),
                    "title": metadata.title,
                },
            )
            table = self._resolver_table()
            table[doi] = str(archive.resolve())
            atomic_write_json(self.resolver_path, table)
        except OSError as exc:
            raise DepositFailed(f"stub deposit of {doi} failed: {exc}") from None
        return receipt

    def resolve(self, doi: str) -> str:
        location = self._resolver_table().get(doi)
        if location is None:
            raise NotFound(f"DOI {doi} is not in the local resolver table")
        return location


def deposit_archive(
    client: DepositClient, solution_file: Path, metadata: SolutionManifest
) -> DepositReceipt:
    """Validate, then hand the file to the deposit client."""
    _parse_and_validate(solution_file)
    return client.deposit(solution_file, metadata)
