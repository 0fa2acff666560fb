"""Exception hierarchy shared by all solcat modules.

Every domain error derives from SolcatError so the CLI and the HTTP
service can map them uniformly (one structured stderr line / one status
code). Exceptions carry the data a caller needs to act on the failure,
not just prose.
"""

from __future__ import annotations


class SolcatError(Exception):
    """Base class for all domain errors."""

    @property
    def kind(self) -> str:
        return type(self).__name__


# --- manifest ---------------------------------------------------------------

class MalformedDocument(SolcatError):
    """Input is not valid UTF-8 JSON text."""


class SchemaViolation(SolcatError):
    """A parsed document violates the manifest schema.

    ``path`` locates the offending node in the input document, e.g.
    ``hooks.run`` or ``args[1].name``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.detail = message


class CoercionError(SolcatError):
    """A raw argument value does not parse as its declared kind."""

    def __init__(self, name: str, message: str):
        super().__init__(f"argument '{name}': {message}")
        self.name = name


# --- catalog ----------------------------------------------------------------

class DuplicateCatalogName(SolcatError):
    pass


class InvalidSource(SolcatError):
    pass


class UnknownCatalog(SolcatError):
    pass


class CatalogBusy(SolcatError):
    pass


class SourceUnreachable(SolcatError):
    pass


class IndexConflict(SolcatError):
    """Two solution files in one catalog claim the same coordinates."""

    def __init__(self, coordinates: str, paths: list[str]):
        super().__init__(
            f"coordinates {coordinates} claimed by multiple files: {', '.join(paths)}"
        )
        self.coordinates = coordinates
        self.paths = paths


# --- collection -------------------------------------------------------------

class LockHeld(SolcatError):
    """Another process holds the collection lock."""

    def __init__(self, holder_pid: int | None, lock_path):
        pid = holder_pid if holder_pid is not None else "unknown"
        super().__init__(f"collection lock {lock_path} held by pid {pid}")
        self.holder_pid = holder_pid
        self.lock_path = lock_path


class CorruptState(SolcatError):
    """State file failed to parse; the file is left untouched."""


class IllegalTransition(SolcatError):
    def __init__(self, coordinates: str, current: str, requested: str):
        super().__init__(
            f"{coordinates}: illegal transition {current} -> {requested}"
        )
        self.current = current
        self.requested = requested


class UnknownSolution(SolcatError):
    pass


class NotInstalled(SolcatError):
    pass


# --- environment ------------------------------------------------------------

class EnvironmentExists(SolcatError):
    pass


class UnknownEnvironment(SolcatError):
    pass


class BackendUnavailable(SolcatError):
    pass


class BackendFailure(SolcatError):
    """External environment manager exited nonzero."""

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message if not stderr else f"{message}: {stderr.strip()}")
        self.stderr = stderr


class SpawnFailure(SolcatError):
    pass


# --- lifecycle --------------------------------------------------------------

class NotFound(SolcatError):
    pass


class AmbiguousCoordinates(SolcatError):
    def __init__(self, coordinates: str, catalog_names: list[str]):
        super().__init__(
            f"{coordinates} found in multiple catalogs: {', '.join(sorted(catalog_names))}"
            " (qualify the reference as catalog:group:name:version)"
        )
        self.coordinates = coordinates
        self.catalog_names = catalog_names


class FetchFailure(SolcatError):
    pass


class AlreadyInstalled(SolcatError):
    pass


class InstallHookFailed(SolcatError):
    def __init__(self, coordinates: str, exit_status: int):
        super().__init__(f"{coordinates}: install hook exited with status {exit_status}")
        self.exit_status = exit_status


class Busy(SolcatError):
    """Another lifecycle operation is in progress for these coordinates."""


class NoTestHook(SolcatError):
    pass


class MissingArgument(SolcatError):
    def __init__(self, name: str):
        super().__init__(f"missing required argument '{name}'")
        self.name = name


class UnknownArgument(SolcatError):
    def __init__(self, name: str):
        super().__init__(f"undeclared argument '{name}'")
        self.name = name


class FileArgumentMissing(SolcatError):
    def __init__(self, name: str, path: str):
        super().__init__(f"argument '{name}': path does not exist: {path}")
        self.name = name
        self.path = path


class StepNotInstalled(SolcatError):
    def __init__(self, index: int, coordinates: str):
        super().__init__(f"pipeline step {index + 1} not installed: {coordinates}")
        self.index = index
        self.coordinates = coordinates


class ValidationFailed(SolcatError):
    """Manifest validation reported errors; the report is attached."""

    def __init__(self, report):
        findings = "; ".join(f.code + " at " + f.path for f in report.errors)
        super().__init__(f"manifest validation failed: {findings}")
        self.report = report


# --- service ----------------------------------------------------------------

class UnknownTask(SolcatError):
    pass


class NegativeOffset(SolcatError):
    pass


# --- deploy -----------------------------------------------------------------

class VersionExists(SolcatError):
    pass


class NotACatalog(SolcatError):
    pass


class DeployFailed(SolcatError):
    pass


class DepositFailed(SolcatError):
    pass
