import csv
import io

import numpy as np
import pytest

from sgcdg import cli
from sgcdg.cli import (
    DEFAULTS,
    ENV_CONFIG,
    ConfigError,
    RunSettings,
    export_slice,
    main,
    parse_config_text,
    parse_plane,
    resolve_config,
    simulate,
)
from sgcdg.functions import constant
from sgcdg.problems import get_problem
from sgcdg.projection import project
from sgcdg.sparse_space import enumerate_space


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    meta = [line for line in text.splitlines() if line.startswith("#")]
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return meta, list(csv.reader(io.StringIO("\n".join(body))))


def test_parse_config_text():
    cfg = parse_config_text("# header\nk = 2\n\nN_max=4  # trailing\nT=")
    assert cfg == {"k": "2", "N_max": "4", "T": ""}
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("just words")
    with pytest.raises(ConfigError, match="empty key"):
        parse_config_text("=3")


def test_unknown_keys_are_listed_with_valid_ones():
    with pytest.raises(ConfigError) as err:
        resolve_config("projection", None, ["bogus=1", "also_bad=2"])
    msg = str(err.value)
    assert "also_bad, bogus" in msg
    assert all(key in msg for key in DEFAULTS["projection"])


def test_file_then_overrides(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("k=3\nN_max=4\n", encoding="utf-8")
    cfg = resolve_config("projection", str(p), ["N_max=5"])
    assert cfg["k"] == "3" and cfg["N_max"] == "5" and cfg["d"] == "2"


def test_env_var_replaces_only_the_path(tmp_path, monkeypatch):
    a, b = tmp_path / "a.cfg", tmp_path / "b.cfg"
    a.write_text("k=1\n", encoding="utf-8")
    b.write_text("k=2\n", encoding="utf-8")
    monkeypatch.setenv(ENV_CONFIG, str(b))
    cfg = resolve_config("projection", str(a), ["N_min=4"])
    assert cfg["k"] == "2" and cfg["N_min"] == "4"
    monkeypatch.setenv(ENV_CONFIG, str(tmp_path / "missing.cfg"))
    with pytest.raises(ConfigError, match="cannot read"):
        resolve_config("projection", str(a), [])


def test_exit_code_2_on_config_errors(capsys):
    for argv in (["projection", "nope=1"], ["convergence", "k=x"], ["convergence", "problem=burgers"],
                 ["cfl", "schemes=upwind"], ["projection", "N_min=5", "N_max=4"],
                 ["slice", "problem=linear-advection", "d=3", "plane=x4=0.5"]):
        code, out, err = run(capsys, *argv)
        assert code == 2 and out == "" and "config error" in err, argv


def test_exit_code_3_on_numerical_failure(capsys):
    code, out, err = run(capsys, "convergence", "N_min=2", "N_max=2", "k=1", "tau_max_rule=1e-320")
    assert code == 3 and "numerical failure" in err


def test_projection_table_and_floor_flag(capsys):
    code, out, _ = run(capsys, "projection", "d=2", "k=1", "N_min=4", "N_max=4")
    assert code == 0
    meta, rows = table(out)
    assert rows[0] == ["N", "h_N", "L2_error", "order", "note"]
    assert rows[1][3] == ""  # one level: no order
    assert float(rows[1][2]) == pytest.approx(2.61e-4, rel=0.03)
    assert any(m.startswith("# build_id=") for m in meta)
    assert "# config.k=1" in meta and "# config.points=table" in meta
    code, out, _ = run(capsys, "projection", "d=2", "k=3", "N_min=6", "N_max=7")
    _, rows = table(out)
    flagged = [r for r in rows[1:] if r[4] == "near machine floor"]
    assert flagged and all(float(r[2]) < cli.MACHINE_FLOOR for r in flagged)


def test_output_is_byte_identical(tmp_path, capsys):
    f = tmp_path / "a.csv"
    runs = []
    for _ in range(2):
        assert main(["convergence", "N_min=2", "N_max=3", "k=1", f"output={f}"]) == 0
        runs.append(f.read_bytes())
    a, b = runs
    assert a == b
    meta, rows = table(a.decode())
    assert rows[0] == ["N", "h_N", "L2_error", "order"]
    assert rows[1][3] == "" and rows[2][3] != ""
    assert all(len(r[2].split("e")[0].replace(".", "").lstrip("-")) == 6 for r in rows[1:])
    keys = {m.split("=", 1)[0] for m in meta if m.startswith("# config.")}
    assert keys == {f"# config.{k}" for k in DEFAULTS["convergence"]}
    assert any("dt_rule" in m for m in meta) and any("tau_max" in m for m in meta)


def test_energy_drift_starts_at_zero(capsys):
    code, out, _ = run(capsys, "energy", "N=3", "T=0.5", "samples=5")
    assert code == 0
    _, rows = table(out)
    assert rows[0] == ["t", "energy", "drift"]
    assert float(rows[1][0]) == 0.0 and float(rows[1][2]) == 0.0
    assert float(rows[-1][0]) == pytest.approx(0.5)
    drifts = [float(r[2]) for r in rows[1:]]
    assert all(x <= 1e-12 for x in drifts)


def test_cfl_subcommand_small(capsys):
    code, out, _ = run(capsys, "cfl", "k=1", "nu=3", "N=3", "N_full=2", "schemes=sparse-cdg")
    assert code == 0
    _, rows = table(out)
    assert rows[0] == ["scheme", "k", "nu", "N", "cfl", "published"]
    assert rows[1][:4] == ["sparse-cdg", "1", "3", "3"] and rows[1][5] == "1.17"


def test_slice_of_a_constant_is_all_ones():
    for mode in (("primal", "periodic"), ("dual", "nonperiodic")):
        S = enumerate_space(3, 3, 1, mode)
        axes, grid = export_slice(project(constant(1.0, 3), S), S, {1: 0.4}, 9)
        assert axes == (0, 2) and grid.shape == (9, 9)
        assert np.abs(grid - 1).max() < 1e-13


def test_slice_subcommand(capsys):
    code, out, _ = run(capsys, "slice", "problem=linear-advection", "k=1", "N=3", "t=0",
                       "resolution=5")
    assert code == 0
    _, rows = table(out)
    assert rows[0] == ["x1", "x2", "u"] and len(rows) == 26


def test_parse_plane():
    assert parse_plane("", 2) == {}
    assert parse_plane("x3=0.5", 3) == {2: 0.5}
    assert parse_plane("x1=0.2, x4=1", 4) == {0: 0.2, 3: 1.0}
    for bad, d in (("x3=0.5", 2), ("y=1", 3), ("x3=2", 3), ("", 3), ("x3=a", 3)):
        with pytest.raises(ConfigError):
            parse_plane(bad, d)


def test_deformational_flow_crescent():
    # coarse version of the contour figure: at half time the bell maximum has moved
    pr = get_problem("deformational-flow")
    out = simulate(pr, RunSettings(N=5, k=1, T=0.5 * pr.T))
    axes, grid = export_slice(out.state.u[0], out.spaces[0], {}, 101)
    i, j = np.unravel_index(np.argmax(grid), grid.shape)
    xs = np.linspace(0, 1, 101)
    cx, cy = pr.params["center"]
    assert np.hypot(xs[i] - cx, xs[j] - cy) > 0.1
