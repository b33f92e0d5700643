import shutil
from pathlib import Path

import numpy as np
import pytest

from stagepop import cli
from stagepop.config import build_scenario, load_scenario, parse_seeds
from stagepop.exceptions import ConfigurationError
from stagepop.output import line_chart, read_summary

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def run(tmp_path, command, scenario, *extra):
    out = tmp_path / f"{command}_{Path(scenario).stem}"
    code = cli.main([command, "--scenario", str(scenario), "--out", str(out), *extra])
    return code, out


def minimal_raw(**model):
    raw = {
        "name": "mini",
        "grid": {"length": 1.0, "n": 8},
        "model": {"d1": 0.1, "d2": 0.1, "coefficients": dict(r=1.0, s=1.0, a=1.0, b=1.0, c=0.0, e=2.0, f=1.0, g=0.0)},
    }
    raw["model"].update(model)
    return raw


def test_every_scenario_parses():
    files = sorted(SCENARIOS.glob("*.toml"))
    assert len(files) >= 9
    for path in files:
        sc = load_scenario(path)
        sc.params.check_grid(sc.grid)


def test_check_negative_certificate(tmp_path):
    code, out = run(tmp_path, "check", "acc2_extinction")
    assert code == 0
    assert read_summary(out / "summary.txt")["verdict"] == "NegativeCertified"


def test_profile_zero_beyond_interface(tmp_path):
    sc = tmp_path / "prof.toml"
    text = (SCENARIOS / "acc7b_profile_sign_change.toml").read_text()
    sc.write_text(text.replace("d_list = [1e-2, 1e-3, 1e-4]", "d_list = []"))
    shutil.copytree(SCENARIOS / "data", tmp_path / "data")
    code, out = run(tmp_path, "profile", sc)
    assert code == 0
    data = np.genfromtxt(out / "profile.csv", delimiter=",", names=True)
    beyond = data["x"] >= 0.5
    assert np.all(data["mask"][beyond] == 0)
    assert np.all(data["u1_star"][beyond] == 0) and np.all(data["u2_star"][beyond] == 0)
    assert np.all(data["mask"][~beyond] == 1)


def test_missing_d1_exits_4(tmp_path, capsys):
    sc = tmp_path / "bad.toml"
    sc.write_text((SCENARIOS / "acc4_equilibrium.toml").read_text().replace("d1 = 0.1\n", ""))
    code, _ = run(tmp_path, "steady", sc)
    assert code == 4
    err = capsys.readouterr().err
    assert "d1" in err and "bad" in err


def test_h1_failure_exits_2(tmp_path):
    sc = tmp_path / "noh1.toml"
    sc.write_text((SCENARIOS / "acc4_equilibrium.toml").read_text().replace("b = 1.0", "b = 0.0"))
    code, _ = run(tmp_path, "eigen", sc)
    assert code == 2


def test_nonconvergence_exits_3(tmp_path):
    sc = tmp_path / "slow.toml"
    text = (SCENARIOS / "acc4_equilibrium.toml").read_text()
    sc.write_text(text.replace("[periodic]\ntol = 1e-8", "[periodic]\ntol = 1e-12\nmax_periods = 2"))
    code, _ = run(tmp_path, "periodic", sc)
    assert code == 3


def test_steady_time_dependent_exits_2(tmp_path):
    sc = tmp_path / "forced.toml"
    sc.write_text((SCENARIOS / "acc5_proportional.toml").read_text())
    shutil.copytree(SCENARIOS / "data", tmp_path / "data")
    code, _ = run(tmp_path, "steady", sc)
    assert code == 2


def test_unknown_coefficient_kind():
    raw = minimal_raw()
    raw["model"]["coefficients"]["r"] = {"spline": [1, 2]}
    with pytest.raises(ConfigurationError, match="model.coefficients.r"):
        build_scenario(raw)


def test_inline_nodal_table():
    raw = minimal_raw()
    raw["model"]["coefficients"]["a"] = {"nodal": [1.0] * 8}
    sc = build_scenario(raw)
    assert sc.params.n_nodes == 8


def test_nodal_size_mismatch():
    raw = minimal_raw()
    raw["model"]["coefficients"]["a"] = {"nodal": [1.0] * 5}
    with pytest.raises(ConfigurationError):
        build_scenario(raw)


def test_seed_kinds():
    sc = build_scenario(minimal_raw())
    seeds = parse_seeds(
        [{"kind": "constant", "u1": 2.0, "u2": 3.0}, {"kind": "random"}, {"kind": "random"}],
        sc.grid, random_seed=5,
    )
    assert seeds[0].u1[0] == 2.0
    again = parse_seeds([{"kind": "constant"}, {"kind": "random"}, {"kind": "random"}], sc.grid, random_seed=5)
    np.testing.assert_array_equal(seeds[2].u1, again[2].u1)
    with pytest.raises(ConfigurationError):
        parse_seeds([{"kind": "eigen"}], sc.grid)


def test_simulate_outputs_and_determinism(tmp_path):
    code, out = run(tmp_path, "simulate", "acc2_extinction")
    assert code == 0
    assert (out / "profiles.svg").read_text().startswith("<svg")
    first = (out / "trajectory.csv").read_bytes()
    code, out2 = run(tmp_path / "again", "simulate", "acc2_extinction")
    assert (out2 / "trajectory.csv").read_bytes() == first


def test_classify_seeds_csv_deterministic(tmp_path):
    sc = tmp_path / "short.toml"
    sc.write_text((SCENARIOS / "acc3_persistence.toml").read_text().replace("t_end = 50.0", "t_end = 3.0"))
    _, a = run(tmp_path / "a", "classify", sc)
    _, b = run(tmp_path / "b", "classify", sc)
    assert (a / "seeds.csv").read_bytes() == (b / "seeds.csv").read_bytes()


def test_sweep_cartesian(tmp_path):
    code, out = run(tmp_path, "sweep", "acc1_decay", "--workers", "2")
    assert code == 0
    rows = np.genfromtxt(out / "sweep_summary.csv", delimiter=",", names=True, dtype=None, encoding=None)
    assert len(rows) == 4
    assert [(r["modeld1"], r["modeld2"]) for r in rows] == [(0.01, 0.01), (0.01, 1.0), (1.0, 0.01), (1.0, 1.0)]
    assert np.all(np.abs(rows["lambda_star"] + 1.0) < 1e-5)
    assert (out / "point_0003" / "eigenfunction.csv").is_file()


def test_sweep_random_is_seeded():
    sc = load_scenario(SCENARIOS / "acc6_sign_sweep.toml")
    a = cli.sweep_points(sc)
    b = cli.sweep_points(sc)
    assert len(a) == 50 and a == b


def test_line_chart_handles_log_axis():
    svg = line_chart([(np.arange(5), np.exp(-np.arange(5)), "decay")], title="t", logy=True)
    assert "<polyline" in svg and svg.strip().endswith("</svg>")
