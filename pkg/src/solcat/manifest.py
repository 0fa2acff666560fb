"""The solution file format: parse, validate, serialize ``solution.json``.

A solution is described by a single declarative JSON document: identity
coordinates, human metadata, an argument schema, an environment
specification, and lifecycle hook commands. Hooks are argv templates
with whole-token ``{{name}}`` placeholders, so any payload language can
be launched; there is no executable code in the manifest itself.

Unknown top-level fields are preserved verbatim for round-trips and
never interpreted.
"""

from __future__ import annotations

import enum
import math
import os
import re
from dataclasses import dataclass, field
from typing import Any

from .coords import Coordinates, Version, parse_coordinates_field
from .errors import CoercionError, MalformedDocument, SchemaViolation
from .jsonutil import canonical_bytes, load_json_bytes

SUPPORTED_API_MAJOR = 1
DEFAULT_API_VERSION = Version(1, 0, 0)
SOLUTION_FILE_NAME = "solution.json"

RESERVED_BINDINGS = ("solution_dir", "workspace")

_PLACEHOLDER_RE = re.compile(r"^\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}$")
_ARG_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_INTEGER_RE = re.compile(r"^[+-]?[0-9]+$")
_DOI_RE = re.compile(r"^10\.[0-9]+/.+$")


class ArgKind(str, enum.Enum):
    STRING = "string"
    INTEGER = "integer"
    FLOAT = "float"
    BOOLEAN = "boolean"
    FILE = "file"
    DIRECTORY = "directory"


@dataclass(frozen=True)
class ArgumentDecl:
    name: str
    kind: ArgKind
    required: bool = False
    default: Any = None  # typed value of `kind`; None means no default
    description: str = ""


@dataclass(frozen=True)
class EnvironmentSpec:
    channels: tuple[str, ...] = ()
    dependencies: tuple[str, ...] = ()

    def unpinned(self) -> list[tuple[int, str]]:
        """Indices and names of dependencies that carry no version pin."""
        return [(i, dep) for i, dep in enumerate(self.dependencies) if "=" not in dep]


@dataclass(frozen=True)
class CommandTemplate:
    """Non-empty argv where each token is a literal or a whole-token ``{{name}}``.

    Tokens merely containing ``{{`` inside a longer string are literals;
    there is no partial-token interpolation.
    """

    argv: tuple[str, ...]

    def placeholders(self) -> list[tuple[int, str]]:
        found = []
        for i, token in enumerate(self.argv):
            match = _PLACEHOLDER_RE.match(token)
            if match:
                found.append((i, match.group(1)))
        return found

    def render(self, bindings: dict[str, str]) -> list[str]:
        rendered = []
        for token in self.argv:
            match = _PLACEHOLDER_RE.match(token)
            rendered.append(bindings[match.group(1)] if match else token)
        return rendered


HOOK_NAMES = ("install", "run", "test", "uninstall")


@dataclass(frozen=True)
class Hooks:
    run: CommandTemplate
    install: CommandTemplate | None = None
    test: CommandTemplate | None = None
    uninstall: CommandTemplate | None = None

    def get(self, name: str) -> CommandTemplate | None:
        return getattr(self, name)


@dataclass(frozen=True)
class Author:
    name: str
    affiliation: str | None = None


@dataclass(frozen=True)
class Citation:
    text: str
    doi: str | None = None


@dataclass(frozen=True)
class SolutionManifest:
    coordinates: Coordinates
    title: str
    hooks: Hooks
    api_version: Version = DEFAULT_API_VERSION
    description: str = ""
    authors: tuple[Author, ...] = ()
    cite: tuple[Citation, ...] = ()
    tags: tuple[str, ...] = ()
    license: str = ""
    documentation: tuple[str, ...] = ()
    args: tuple[ArgumentDecl, ...] = ()
    environment: EnvironmentSpec = EnvironmentSpec()
    extras: tuple[tuple[str, Any], ...] = ()

    def arg(self, name: str) -> ArgumentDecl | None:
        for decl in self.args:
            if decl.name == name:
                return decl
        return None


@dataclass(frozen=True)
class Finding:
    code: str
    path: str
    message: str


@dataclass
class ValidationReport:
    errors: list[Finding] = field(default_factory=list)
    warnings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


# --- parsing ----------------------------------------------------------------

_KNOWN_FIELDS = frozenset(
    {
        "api_version",
        "coordinates",
        "title",
        "description",
        "authors",
        "cite",
        "tags",
        "license",
        "documentation",
        "args",
        "environment",
        "hooks",
    }
)


def _expect_str(value, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaViolation(path, f"expected string, got {type(value).__name__}")
    return value


def _expect_bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise SchemaViolation(path, f"expected boolean, got {type(value).__name__}")
    return value


def _expect_list(value, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaViolation(path, f"expected list, got {type(value).__name__}")
    return value


def _expect_object(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaViolation(path, f"expected object, got {type(value).__name__}")
    return value


def _str_list(value, path: str) -> tuple[str, ...]:
    return tuple(_expect_str(item, f"{path}[{i}]") for i, item in enumerate(_expect_list(value, path)))


def _parse_authors(value, path: str) -> tuple[Author, ...]:
    authors = []
    for i, item in enumerate(_expect_list(value, path)):
        obj = _expect_object(item, f"{path}[{i}]")
        if "name" not in obj:
            raise SchemaViolation(f"{path}[{i}].name", "author name is mandatory")
        name = _expect_str(obj["name"], f"{path}[{i}].name")
        affiliation = None
        if obj.get("affiliation") is not None:
            affiliation = _expect_str(obj["affiliation"], f"{path}[{i}].affiliation")
        authors.append(Author(name, affiliation))
    return tuple(authors)


def _parse_cite(value, path: str) -> tuple[Citation, ...]:
    entries = []
    for i, item in enumerate(_expect_list(value, path)):
        obj = _expect_object(item, f"{path}[{i}]")
        if "text" not in obj:
            raise SchemaViolation(f"{path}[{i}].text", "citation text is mandatory")
        text = _expect_str(obj["text"], f"{path}[{i}].text")
        doi = None
        if obj.get("doi") is not None:
            doi = _expect_str(obj["doi"], f"{path}[{i}].doi")
            if not _DOI_RE.match(doi):
                raise SchemaViolation(f"{path}[{i}].doi", f"not a DOI: {doi!r}")
        entries.append(Citation(text, doi))
    return tuple(entries)


def _normalize_default(kind: ArgKind, value, path: str):
    """Normalize a declared default to the typed value of its kind.

    Accepts either the native JSON representation or a string that
    coerces; stores the typed value so canonical serialization is
    stable. File and directory defaults stay as the authored relative
    string; absolutization happens at run time.
    """
    try:
        if isinstance(value, str):
            if kind in (ArgKind.FILE, ArgKind.DIRECTORY):
                if not value:
                    raise CoercionError("default", "empty path")
                return value
            return _coerce(kind, value)
        if kind is ArgKind.BOOLEAN and isinstance(value, bool):
            return value
        if kind is ArgKind.INTEGER and isinstance(value, int) and not isinstance(value, bool):
            return value
        if kind is ArgKind.FLOAT and isinstance(value, (int, float)) and not isinstance(value, bool):
            if not math.isfinite(value):
                raise CoercionError("default", "non-finite number")
            return float(value)
    except CoercionError as exc:
        raise SchemaViolation(path, f"default does not coerce as {kind.value}: {exc}") from None
    raise SchemaViolation(path, f"default does not match kind {kind.value}")


def _parse_args(value, path: str) -> tuple[ArgumentDecl, ...]:
    decls = []
    seen: set[str] = set()
    for i, item in enumerate(_expect_list(value, path)):
        obj = _expect_object(item, f"{path}[{i}]")
        if "name" not in obj:
            raise SchemaViolation(f"{path}[{i}].name", "argument name is mandatory")
        name = _expect_str(obj["name"], f"{path}[{i}].name")
        if not _ARG_NAME_RE.match(name):
            raise SchemaViolation(f"{path}[{i}].name", f"not an identifier: {name!r}")
        if name in seen:
            raise SchemaViolation(f"{path}[{i}].name", f"duplicate argument name: {name!r}")
        seen.add(name)
        if "kind" not in obj:
            raise SchemaViolation(f"{path}[{i}].kind", "argument kind is mandatory")
        kind_text = _expect_str(obj["kind"], f"{path}[{i}].kind")
        try:
            kind = ArgKind(kind_text)
        except ValueError:
            raise SchemaViolation(f"{path}[{i}].kind", f"unknown kind: {kind_text!r}") from None
        required = _expect_bool(obj.get("required", False), f"{path}[{i}].required")
        default = None
        if "default" in obj and obj["default"] is not None:
            if required:
                raise SchemaViolation(f"{path}[{i}].default", "required argument may not declare a default")
            default = _normalize_default(kind, obj["default"], f"{path}[{i}].default")
        description = _expect_str(obj.get("description", ""), f"{path}[{i}].description")
        decls.append(ArgumentDecl(name, kind, required, default, description))
    return tuple(decls)


def _parse_environment(value, path: str) -> EnvironmentSpec:
    obj = _expect_object(value, path)
    channels = _str_list(obj.get("channels", []), f"{path}.channels")
    dependencies = _str_list(obj.get("dependencies", []), f"{path}.dependencies")
    for i, dep in enumerate(dependencies):
        if not dep or any(ch.isspace() for ch in dep):
            raise SchemaViolation(
                f"{path}.dependencies[{i}]",
                f"dependency must be non-empty and whitespace-free: {dep!r}",
            )
    return EnvironmentSpec(channels, dependencies)


def _parse_template(value, path: str) -> CommandTemplate:
    tokens = _expect_list(value, path)
    if not tokens:
        raise SchemaViolation(path, "hook argv must be non-empty")
    return CommandTemplate(tuple(_expect_str(t, f"{path}[{i}]") for i, t in enumerate(tokens)))


def _parse_hooks(value, path: str, arg_names: set[str]) -> Hooks:
    obj = _expect_object(value, path)
    for key in obj:
        if key not in HOOK_NAMES:
            raise SchemaViolation(f"{path}.{key}", f"unknown hook: {key!r}")
    if "run" not in obj:
        raise SchemaViolation(f"{path}.run", "run hook is mandatory")
    parsed: dict[str, CommandTemplate | None] = {name: None for name in HOOK_NAMES}
    known = arg_names | set(RESERVED_BINDINGS)
    for name in HOOK_NAMES:
        if name not in obj:
            continue
        template = _parse_template(obj[name], f"{path}.{name}")
        for i, placeholder in template.placeholders():
            if placeholder not in known:
                raise SchemaViolation(
                    f"{path}.{name}[{i}]",
                    f"placeholder {{{{{placeholder}}}}} names no declared argument or reserved binding",
                )
        parsed[name] = template
    return Hooks(
        run=parsed["run"],
        install=parsed["install"],
        test=parsed["test"],
        uninstall=parsed["uninstall"],
    )


def parse_manifest(document: bytes) -> SolutionManifest:
    """Parse a ``solution.json`` document into a SolutionManifest.

    Raises MalformedDocument when the bytes are not UTF-8 JSON, and
    SchemaViolation (with a field path locating the offending node)
    for any schema rule violation.
    """
    try:
        raw = load_json_bytes(document)
    except (UnicodeDecodeError, ValueError) as exc:
        raise MalformedDocument(f"not a UTF-8 JSON document: {exc}") from None
    obj = _expect_object(raw, "")

    if "coordinates" not in obj:
        raise SchemaViolation("coordinates", "coordinates are mandatory")
    coordinates = parse_coordinates_field(obj["coordinates"], "coordinates")

    if "title" not in obj:
        raise SchemaViolation("title", "title is mandatory")
    title = _expect_str(obj["title"], "title")

    api_version = DEFAULT_API_VERSION
    if "api_version" in obj:
        text = _expect_str(obj["api_version"], "api_version")
        try:
            api_version = Version.parse(text)
        except ValueError as exc:
            raise SchemaViolation("api_version", str(exc)) from None

    description = _expect_str(obj.get("description", ""), "description")
    authors = _parse_authors(obj.get("authors", []), "authors")
    cite = _parse_cite(obj.get("cite", []), "cite")
    tags = _str_list(obj.get("tags", []), "tags")
    license_text = _expect_str(obj.get("license", ""), "license")
    documentation = _str_list(obj.get("documentation", []), "documentation")
    args = _parse_args(obj.get("args", []), "args")
    environment = _parse_environment(obj.get("environment", {}), "environment")

    if "hooks" not in obj:
        raise SchemaViolation("hooks.run", "run hook is mandatory")
    hooks = _parse_hooks(obj["hooks"], "hooks", {decl.name for decl in args})

    extras = tuple(sorted((k, v) for k, v in obj.items() if k not in _KNOWN_FIELDS))
    return SolutionManifest(
        coordinates=coordinates,
        title=title,
        hooks=hooks,
        api_version=api_version,
        description=description,
        authors=authors,
        cite=cite,
        tags=tags,
        license=license_text,
        documentation=documentation,
        args=args,
        environment=environment,
        extras=extras,
    )


# --- serialization ----------------------------------------------------------

def _author_obj(author: Author) -> dict:
    obj = {"name": author.name}
    if author.affiliation is not None:
        obj["affiliation"] = author.affiliation
    return obj


def _citation_obj(citation: Citation) -> dict:
    obj = {"text": citation.text}
    if citation.doi is not None:
        obj["doi"] = citation.doi
    return obj


def _arg_obj(decl: ArgumentDecl) -> dict:
    obj = {
        "name": decl.name,
        "kind": decl.kind.value,
        "required": decl.required,
        "description": decl.description,
    }
    if decl.default is not None:
        obj["default"] = decl.default
    return obj


def manifest_to_dict(manifest: SolutionManifest) -> dict:
    obj: dict[str, Any] = dict(manifest.extras)
    obj.update(
        {
            "api_version": manifest.api_version.render(),
            "coordinates": manifest.coordinates.render(),
            "title": manifest.title,
            "description": manifest.description,
            "authors": [_author_obj(a) for a in manifest.authors],
            "cite": [_citation_obj(c) for c in manifest.cite],
            "tags": list(manifest.tags),
            "license": manifest.license,
            "documentation": list(manifest.documentation),
            "args": [_arg_obj(a) for a in manifest.args],
            "environment": {
                "channels": list(manifest.environment.channels),
                "dependencies": list(manifest.environment.dependencies),
            },
            "hooks": {
                name: list(template.argv)
                for name in HOOK_NAMES
                if (template := manifest.hooks.get(name)) is not None
            },
        }
    )
    return obj


def serialize_manifest(manifest: SolutionManifest) -> bytes:
    """Canonical bytes for a manifest; parse(serialize(m)) == m."""
    return canonical_bytes(manifest_to_dict(manifest))


# --- validation -------------------------------------------------------------

def validate_manifest(manifest: SolutionManifest) -> ValidationReport:
    """Semantic checks on a parsed manifest.

    The report's errors are empty iff the solution is installable;
    warnings flag reproducibility hazards without blocking anything.
    """
    report = ValidationReport()
    if manifest.api_version.major != SUPPORTED_API_MAJOR:
        report.errors.append(
            Finding(
                "UnsupportedApiVersion",
                "api_version",
                f"manifest requires schema {manifest.api_version.render()}, "
                f"this tool supports major {SUPPORTED_API_MAJOR}",
            )
        )
    for i, dep in manifest.environment.unpinned():
        report.warnings.append(
            Finding(
                "UnpinnedDependency",
                f"environment.dependencies[{i}]",
                f"dependency {dep!r} carries no version pin",
            )
        )
    if not manifest.license:
        report.warnings.append(Finding("MissingLicense", "license", "license field is empty"))
    return report


# --- argument coercion ------------------------------------------------------

def _coerce(kind: ArgKind, raw: str):
    if kind is ArgKind.STRING:
        return raw
    if kind is ArgKind.INTEGER:
        if not _INTEGER_RE.match(raw):
            raise ValueError(f"not an integer: {raw!r}")
        return int(raw)
    if kind is ArgKind.FLOAT:
        try:
            value = float(raw)
        except ValueError:
            raise ValueError(f"not a number: {raw!r}") from None
        if not math.isfinite(value):
            raise ValueError(f"not a finite number: {raw!r}")
        return value
    if kind is ArgKind.BOOLEAN:
        if raw == "true":
            return True
        if raw == "false":
            return False
        raise ValueError(f"boolean must be exactly 'true' or 'false', got {raw!r}")
    if kind in (ArgKind.FILE, ArgKind.DIRECTORY):
        if not raw:
            raise ValueError("empty path")
        return os.path.abspath(os.path.expanduser(raw))
    raise AssertionError(f"unhandled kind {kind}")


def coerce_argument(decl: ArgumentDecl, raw: str):
    """Coerce user-supplied text to the declared kind.

    File and directory kinds return normalized absolute paths without
    requiring existence; the lifecycle checks existence at run time.
    """
    try:
        return _coerce(decl.kind, raw)
    except ValueError as exc:
        raise CoercionError(decl.name, str(exc)) from None


def render_argument(kind: ArgKind, value) -> str:
    """Render a typed value back to its canonical text form."""
    if kind is ArgKind.BOOLEAN:
        return "true" if value else "false"
    return str(value)
