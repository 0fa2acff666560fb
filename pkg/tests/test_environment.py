"""Environment backends: naming, create/execute/remove, log multiplexing."""

import io
import sys

import pytest

from solcat.coords import Coordinates, Version
from solcat.environment import (
    create_environment,
    derive_env_name,
    environment_handle,
    execute_in_environment,
    external_config,
    remove_environment,
    render_environment_file,
)
from solcat.errors import (
    BackendFailure,
    BackendUnavailable,
    EnvironmentExists,
    SpawnFailure,
    UnknownEnvironment,
)
from solcat.manifest import EnvironmentSpec

PY = sys.executable

SPEC = EnvironmentSpec(("conda-forge",), ("numpy=1.26",))


def test_derive_env_name_examples():
    assert derive_env_name(Coordinates.parse("org.example:seg:1.2.0")) == "solcat_org_example_seg_1_2_0"
    assert derive_env_name(Coordinates.parse("a:b:0.0.1")) == "solcat_a_b_0_0_1"


def test_derive_env_name_injective_on_grid():
    groups = ["org.example", "org.other", "lab", "a.b.c"]
    names = ["seg", "track", "seg2"]
    versions = [Version(0, 0, 1), Version(1, 2, 0), Version(1, 2, 0, ("rc", "1"))]
    grid = [Coordinates(g, n, v) for g in groups for n in names for v in versions]
    derived = [derive_env_name(c) for c in grid]
    assert len(set(derived)) == len(grid)


def test_plain_create_execute_remove(plain_cfg, tmp_path):
    name = "solcat_a_b_0_0_1"
    handle = create_environment(plain_cfg, name, SPEC)
    assert handle.backend_id == "plain"
    assert environment_handle(plain_cfg, name) is not None

    with pytest.raises(EnvironmentExists):
        create_environment(plain_cfg, name, SPEC)

    sink = io.StringIO()
    status = execute_in_environment(plain_cfg, handle, [PY, "-c", "raise SystemExit(0)"], tmp_path / "w", sink)
    assert status == 0
    status = execute_in_environment(plain_cfg, handle, [PY, "-c", "raise SystemExit(3)"], tmp_path / "w", sink)
    assert status == 3  # nonzero exit is data, not an error

    assert remove_environment(plain_cfg, handle) is True
    with pytest.raises(UnknownEnvironment):
        execute_in_environment(plain_cfg, handle, [PY, "-c", "pass"], tmp_path / "w", sink)
    assert remove_environment(plain_cfg, handle) is False  # already absent


def test_missing_executable(home):
    cfg = external_config(home / "envs", executable="definitely-not-a-real-binary-xyz")
    with pytest.raises(BackendUnavailable):
        create_environment(cfg, "solcat_x", SPEC)


def test_log_prefixes(plain_cfg, tmp_path):
    handle = create_environment(plain_cfg, "solcat_logs", SPEC)
    sink = io.StringIO()
    script = "import sys; print('to out'); print('to err', file=sys.stderr)"
    status = execute_in_environment(plain_cfg, handle, [PY, "-c", script], tmp_path / "w", sink)
    assert status == 0
    lines = sink.getvalue().splitlines()
    assert sorted(lines) == ["ERR to err", "OUT to out"]


def test_no_log_lines_lost(plain_cfg, tmp_path):
    handle = create_environment(plain_cfg, "solcat_many", SPEC)
    sink = io.StringIO()
    script = (
        "import sys\n"
        "for i in range(200):\n"
        "    print(f'o{i}')\n"
        "    print(f'e{i}', file=sys.stderr)\n"
    )
    execute_in_environment(plain_cfg, handle, [PY, "-c", script], tmp_path / "w", sink)
    lines = sink.getvalue().splitlines()
    outs = [line[4:] for line in lines if line.startswith("OUT ")]
    errs = [line[4:] for line in lines if line.startswith("ERR ")]
    assert outs == [f"o{i}" for i in range(200)]
    assert errs == [f"e{i}" for i in range(200)]


def test_spawn_failure(plain_cfg, tmp_path):
    handle = create_environment(plain_cfg, "solcat_spawn", SPEC)
    with pytest.raises(SpawnFailure):
        execute_in_environment(
            plain_cfg, handle, ["./no-such-binary-anywhere"], tmp_path / "w", io.StringIO()
        )


def test_render_environment_file():
    content = render_environment_file("solcat_x", ["conda-forge", "bioconda"], ["numpy=1.26", "scipy"])
    assert content == (
        "name: solcat_x\n"
        "channels:\n"
        "  - conda-forge\n"
        "  - bioconda\n"
        "dependencies:\n"
        "  - numpy=1.26\n"
        "  - scipy\n"
    )


def test_external_stub_lifecycle(external_cfg, tmp_path):
    name = "solcat_stub_env"
    handle = create_environment(external_cfg, name, SPEC)
    # the stub records the rendered environment file content
    marker = tmp_path / "stub_markers" / name
    assert marker.exists()
    assert "numpy=1.26" in marker.read_text()

    sink = io.StringIO()
    status = execute_in_environment(external_cfg, handle, [PY, "-c", "print('hi')"], tmp_path / "w", sink)
    assert status == 0
    assert "OUT hi" in sink.getvalue()

    assert remove_environment(external_cfg, handle) is True
    assert not marker.exists()


def test_external_stub_create_failure(external_cfg, monkeypatch):
    monkeypatch.setenv("STUB_FAIL", "create")
    with pytest.raises(BackendFailure) as exc:
        create_environment(external_cfg, "solcat_failing", SPEC)
    assert "simulated create failure" in exc.value.stderr
    # nothing recorded on failure
    assert environment_handle(external_cfg, "solcat_failing") is None


def test_external_stub_remove_failure(external_cfg, monkeypatch):
    handle = create_environment(external_cfg, "solcat_sticky", SPEC)
    monkeypatch.setenv("STUB_FAIL", "remove")
    with pytest.raises(BackendFailure) as exc:
        remove_environment(external_cfg, handle)
    assert "simulated remove failure" in exc.value.stderr
    # still recorded, retry possible once the tool recovers
    monkeypatch.delenv("STUB_FAIL")
    assert remove_environment(external_cfg, handle) is True
