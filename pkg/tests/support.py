"""Shared fixture builders: random manifests, fixture solutions, fixture catalogs."""

from __future__ import annotations

import random
import string
import sys
from pathlib import Path

from solcat.jsonutil import canonical_bytes

PY = sys.executable

WORDS = [
    "segment", "nuclei", "registration", "tracking", "deconvolve", "stitch",
    "classify", "measure", "denoise", "render", "export", "threshold",
]


def make_manifest_dict(
    group="org.example",
    name="seg",
    version="1.2.0",
    *,
    title="Segment nuclei",
    args=(),
    hooks=None,
    channels=(),
    dependencies=(),
    **extra_fields,
):
    """A valid solution document; run hook defaults to a no-op."""
    doc = {
        "coordinates": f"{group}:{name}:{version}",
        "title": title,
        "args": list(args),
        "environment": {"channels": list(channels), "dependencies": list(dependencies)},
        "hooks": hooks if hooks is not None else {"run": [PY, "-c", "pass"]},
    }
    doc.update(extra_fields)
    return doc


def write_solution(directory: Path, doc: dict) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "solution.json"
    path.write_bytes(canonical_bytes(doc))
    return path


def make_catalog(root: Path, name: str, docs: list[dict]) -> Path:
    """Build a directory catalog with the canonical on-disk layout."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "catalog.json").write_bytes(
        canonical_bytes({"name": name, "schema_version": "1.0.0"})
    )
    for doc in docs:
        group, sol_name, version = doc["coordinates"].split(":")
        write_solution(root / "solutions" / group / sol_name / version, doc)
    return root


BASE_DOCUMENT = {
    "api_version": "1.0.0",
    "coordinates": "org.example:seg:1.2.0",
    "title": "Segment nuclei",
    "description": "Threshold-based segmentation",
    "authors": [{"name": "ada", "affiliation": "example lab"}],
    "cite": [{"text": "Ada et al. 2020", "doi": "10.1234/abcd"}],
    "tags": ["segmentation", "imaging"],
    "license": "MIT",
    "documentation": ["docs/usage.md"],
    "args": [
        {"name": "threshold", "kind": "float", "default": 0.5, "description": "cutoff"},
        {"name": "input", "kind": "file", "required": True, "description": "image"},
    ],
    "environment": {"channels": ["conda-forge"], "dependencies": ["numpy=1.26"]},
    "hooks": {"run": [PY, "-c", "pass", "{{threshold}}", "{{input}}"]},
}


def _mutate(path_keys, value):
    """Return a copy of BASE_DOCUMENT with the node at path_keys replaced (or deleted)."""
    import copy

    doc = copy.deepcopy(BASE_DOCUMENT)
    node = doc
    for key in path_keys[:-1]:
        node = node[key]
    if value is _DELETE:
        del node[path_keys[-1]]
    else:
        node[path_keys[-1]] = value
    return doc


_DELETE = object()


def mutation_cases():
    """Exactly 20 schema mutations paired with the field path that locates each."""
    run_len = len(BASE_DOCUMENT["hooks"]["run"])
    dup_arg = dict(BASE_DOCUMENT["args"][1], name="threshold")
    req_with_default = dict(BASE_DOCUMENT["args"][1], default="data/x.csv")
    return [
        ("missing-run-hook", _mutate(("hooks", "run"), _DELETE), "hooks.run"),
        ("missing-coordinates", _mutate(("coordinates",), _DELETE), "coordinates"),
        ("missing-title", _mutate(("title",), _DELETE), "title"),
        ("bad-coordinates", _mutate(("coordinates",), "Org:x:1"), "coordinates"),
        ("title-wrong-type", _mutate(("title",), 42), "title"),
        ("bad-api-version", _mutate(("api_version",), "1.0"), "api_version"),
        ("description-wrong-type", _mutate(("description",), [1]), "description"),
        ("author-missing-name", _mutate(("authors", 0), {"affiliation": "x"}), "authors[0].name"),
        ("affiliation-wrong-type", _mutate(("authors", 0, "affiliation"), 3), "authors[0].affiliation"),
        ("bad-doi", _mutate(("cite", 0, "doi"), "zenodo/123"), "cite[0].doi"),
        ("tag-wrong-type", _mutate(("tags", 1), 7), "tags[1]"),
        ("license-wrong-type", _mutate(("license",), {}), "license"),
        ("documentation-wrong-type", _mutate(("documentation", 0), 1), "documentation[0]"),
        ("bad-arg-name", _mutate(("args", 0, "name"), "9 bad"), "args[0].name"),
        ("duplicate-arg-name", _mutate(("args", 1), dup_arg), "args[1].name"),
        ("unknown-arg-kind", _mutate(("args", 0, "kind"), "matrix"), "args[0].kind"),
        ("required-with-default", _mutate(("args", 1), req_with_default), "args[1].default"),
        ("dependency-whitespace", _mutate(("environment", "dependencies", 0), "num py"), "environment.dependencies[0]"),
        ("empty-run-argv", _mutate(("hooks", "run"), []), "hooks.run"),
        ("dangling-placeholder", _mutate(("hooks", "run", run_len - 1), "{{treshold}}"), f"hooks.run[{run_len - 1}]"),
    ]


def _ident(rng: random.Random, length: int) -> str:
    first = rng.choice(string.ascii_lowercase)
    rest = "".join(rng.choice(string.ascii_lowercase + string.digits) for _ in range(length - 1))
    return first + rest


def _version_text(rng: random.Random) -> str:
    base = f"{rng.randrange(20)}.{rng.randrange(20)}.{rng.randrange(20)}"
    if rng.random() < 0.3:
        idents = [rng.choice(["alpha", "beta", "rc", str(rng.randrange(10))]) for _ in range(rng.randrange(1, 3))]
        return base + "-" + ".".join(idents)
    return base


def _random_arg(rng: random.Random, name: str) -> dict:
    kind = rng.choice(["string", "integer", "float", "boolean", "file", "directory"])
    decl = {"name": name, "kind": kind, "description": rng.choice(WORDS)}
    if rng.random() < 0.4:
        decl["required"] = True
    elif rng.random() < 0.5:
        decl["default"] = {
            "string": rng.choice(WORDS),
            "integer": rng.randrange(-50, 50),
            "float": round(rng.uniform(-5, 5), 3),
            "boolean": rng.random() < 0.5,
            "file": f"data/{rng.choice(WORDS)}.csv",
            "directory": f"out/{rng.choice(WORDS)}",
        }[kind]
    return decl


def build_random_document(rng: random.Random) -> dict:
    """A randomly populated valid solution document exercising every field."""
    arg_names = rng.sample(["input", "output", "threshold", "sigma", "verbose", "mask"], rng.randrange(4))
    args = [_random_arg(rng, name) for name in arg_names]
    placeholder_pool = ["{{solution_dir}}", "{{workspace}}"] + [f"{{{{{n}}}}}" for n in arg_names]
    run = [PY, "-c", "pass"] + rng.sample(placeholder_pool, rng.randrange(len(placeholder_pool) + 1))
    hooks = {"run": run}
    for optional in ("install", "test", "uninstall"):
        if rng.random() < 0.4:
            hooks[optional] = [PY, "-c", "pass", rng.choice(placeholder_pool)]
    doc = {
        "coordinates": f"{_ident(rng, 4)}.{_ident(rng, 6)}:{_ident(rng, 5)}:{_version_text(rng)}",
        "title": " ".join(rng.sample(WORDS, 2)).title(),
        "hooks": hooks,
        "args": args,
    }
    if rng.random() < 0.7:
        doc["description"] = " ".join(rng.sample(WORDS, 4))
    if rng.random() < 0.7:
        doc["authors"] = [
            {"name": _ident(rng, 7)} if rng.random() < 0.5
            else {"name": _ident(rng, 7), "affiliation": _ident(rng, 9)}
            for _ in range(rng.randrange(1, 3))
        ]
    if rng.random() < 0.5:
        doc["cite"] = [{"text": " ".join(rng.sample(WORDS, 3)), "doi": f"10.{rng.randrange(1000, 9999)}/{_ident(rng, 6)}"}]
    if rng.random() < 0.7:
        doc["tags"] = rng.sample(WORDS, rng.randrange(1, 4))
    if rng.random() < 0.7:
        doc["license"] = rng.choice(["MIT", "Apache-2.0", "BSD-3-Clause"])
    if rng.random() < 0.4:
        doc["documentation"] = [f"docs/{_ident(rng, 5)}.md"]
    if rng.random() < 0.6:
        doc["environment"] = {
            "channels": rng.sample(["conda-forge", "bioconda", "defaults"], rng.randrange(3)),
            "dependencies": [
                f"{_ident(rng, 6)}={rng.randrange(10)}.{rng.randrange(10)}" if rng.random() < 0.7 else _ident(rng, 6)
                for _ in range(rng.randrange(4))
            ],
        }
    if rng.random() < 0.3:
        doc["x_custom"] = {"nested": [1, 2, {"deep": _ident(rng, 4)}]}
    return doc
