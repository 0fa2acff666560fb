"""Solution file format: parse, serialize, validate, coerce."""

import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from solcat.coords import Version
from solcat.errors import CoercionError, MalformedDocument, SchemaViolation
from solcat.jsonutil import canonical_bytes
from solcat.manifest import (
    ArgKind,
    ArgumentDecl,
    coerce_argument,
    parse_manifest,
    render_argument,
    serialize_manifest,
    validate_manifest,
)

from support import BASE_DOCUMENT, PY, build_random_document, make_manifest_dict, mutation_cases


def test_minimal_document():
    doc = {
        "coordinates": "org.example:seg:1.2.0",
        "title": "Segment nuclei",
        "args": [],
        "environment": {"channels": [], "dependencies": []},
        "hooks": {"run": [PY, "-c", "pass"]},
    }
    manifest = parse_manifest(canonical_bytes(doc))
    assert manifest.coordinates.render() == "org.example:seg:1.2.0"
    assert manifest.title == "Segment nuclei"
    assert manifest.api_version == Version(1, 0, 0)
    assert manifest.description == ""
    assert manifest.args == ()
    assert manifest.environment.channels == ()
    assert manifest.hooks.install is None
    assert manifest.extras == ()


def test_missing_run_hook_path():
    doc = make_manifest_dict(hooks={"install": [PY, "-c", "pass"]})
    with pytest.raises(SchemaViolation) as exc:
        parse_manifest(canonical_bytes(doc))
    assert exc.value.path == "hooks.run"


def test_dangling_placeholder_named():
    doc = make_manifest_dict(
        args=[{"name": "threshold", "kind": "float"}],
        hooks={"run": [PY, "-c", "pass", "{{treshold}}"]},
    )
    with pytest.raises(SchemaViolation) as exc:
        parse_manifest(canonical_bytes(doc))
    assert "treshold" in str(exc.value)
    assert exc.value.path == "hooks.run[3]"


def test_not_json():
    with pytest.raises(MalformedDocument):
        parse_manifest(b"not json {{{")
    with pytest.raises(MalformedDocument):
        parse_manifest(b"\xff\xfe\x00")


def test_unknown_fields_preserved():
    doc = make_manifest_dict(x_future={"a": [1, 2]}, x_other="keep")
    manifest = parse_manifest(canonical_bytes(doc))
    assert dict(manifest.extras) == {"x_future": {"a": [1, 2]}, "x_other": "keep"}
    round_tripped = json.loads(serialize_manifest(manifest))
    assert round_tripped["x_future"] == {"a": [1, 2]}
    assert round_tripped["x_other"] == "keep"


@pytest.mark.parametrize("name,doc,expected_path", mutation_cases())
def test_mutation_paths(name, doc, expected_path):
    with pytest.raises(SchemaViolation) as exc:
        parse_manifest(canonical_bytes(doc))
    assert exc.value.path == expected_path, name


def test_serialize_is_canonical():
    manifest = parse_manifest(canonical_bytes(BASE_DOCUMENT))
    shuffled = dict(reversed(list(BASE_DOCUMENT.items())))
    assert serialize_manifest(parse_manifest(json.dumps(shuffled).encode())) == serialize_manifest(manifest)


def test_round_trip_minimal():
    manifest = parse_manifest(canonical_bytes(make_manifest_dict()))
    assert parse_manifest(serialize_manifest(manifest)) == manifest


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_round_trip_generated(seed):
    doc = build_random_document(random.Random(seed))
    manifest = parse_manifest(canonical_bytes(doc))
    again = parse_manifest(serialize_manifest(manifest))
    assert again == manifest
    # serializing twice is bit-stable
    assert serialize_manifest(again) == serialize_manifest(manifest)


def test_validate_pinned_ok():
    manifest = parse_manifest(canonical_bytes(make_manifest_dict(dependencies=["numpy=1.26"], license="MIT")))
    report = validate_manifest(manifest)
    assert report.ok
    assert report.warnings == []


def test_validate_unpinned_warns():
    manifest = parse_manifest(canonical_bytes(make_manifest_dict(dependencies=["numpy"], license="MIT")))
    report = validate_manifest(manifest)
    assert report.ok
    assert [w.code for w in report.warnings] == ["UnpinnedDependency"]
    assert report.warnings[0].path == "environment.dependencies[0]"


def test_validate_missing_license_warns():
    manifest = parse_manifest(canonical_bytes(make_manifest_dict()))
    assert "MissingLicense" in [w.code for w in validate_manifest(manifest).warnings]


def test_validate_api_major_gate():
    manifest = parse_manifest(canonical_bytes(make_manifest_dict(api_version="2.0.0")))
    report = validate_manifest(manifest)
    assert not report.ok
    assert report.errors[0].code == "UnsupportedApiVersion"


def test_coerce_integer():
    decl = ArgumentDecl("n", ArgKind.INTEGER)
    assert coerce_argument(decl, "42") == 42
    with pytest.raises(CoercionError) as exc:
        coerce_argument(decl, "4.2")
    assert exc.value.name == "n"


def test_coerce_boolean_lexemes():
    decl = ArgumentDecl("flag", ArgKind.BOOLEAN)
    assert coerce_argument(decl, "true") is True
    assert coerce_argument(decl, "false") is False
    for raw in ("yes", "True", "1", ""):
        with pytest.raises(CoercionError):
            coerce_argument(decl, raw)


def test_coerce_float():
    decl = ArgumentDecl("sigma", ArgKind.FLOAT)
    assert coerce_argument(decl, "4.2") == 4.2
    assert coerce_argument(decl, "4") == 4.0
    with pytest.raises(CoercionError):
        coerce_argument(decl, "inf")


def test_coerce_file_absolute(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    decl = ArgumentDecl("input", ArgKind.FILE)
    value = coerce_argument(decl, "data/in.csv")
    assert value == str(tmp_path / "data" / "in.csv")
    # no existence requirement at coercion time
    assert coerce_argument(decl, "missing/file.txt")


@given(
    st.sampled_from(list(ArgKind)),
    st.one_of(
        st.integers(min_value=-10**6, max_value=10**6).map(str),
        st.booleans().map(lambda b: "true" if b else "false"),
        st.floats(allow_nan=False, allow_infinity=False, width=32).map(str),
        st.text(alphabet="abc/xyz.-_", min_size=1, max_size=12),
    ),
)
def test_coerce_render_coerce_idempotent(kind, raw):
    decl = ArgumentDecl("x", kind)
    try:
        first = coerce_argument(decl, raw)
    except CoercionError:
        return
    rendered = render_argument(kind, first)
    assert coerce_argument(decl, rendered) == first
