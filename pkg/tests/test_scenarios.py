import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nested_mzi.cli import main
from nested_mzi.config import ConfigError, NoiseSpec, ScenarioConfig
from nested_mzi.network import VibrationSpec
from nested_mzi.scenarios import (
    DEFAULT_SWEEPS,
    builtin_scenario,
    run,
    scenario_names,
    sweep,
    weak_value_table,
)
from nested_mzi.trace import PointerSpec, SWEEP_COLUMNS


def quick(config):
    return config.with_(duration=0.5, sample_rate=4096)


# -- built-ins ------------------------------------------------------------------


def test_builtin_names():
    assert set(scenario_names()) >= {"fig2b", "fig2c", "salih", "leakage_sweep", "paradox", "trace_sweep"}
    for name in scenario_names():
        assert builtin_scenario(name).name == name


def test_unknown_scenario_lists_valid_names():
    with pytest.raises(ConfigError, match="fig2b"):
        builtin_scenario("fig9")


def test_weak_value_table_fig2b():
    table = weak_value_table(builtin_scenario("fig2b"))
    vals = table["values"]
    assert vals["A"] == pytest.approx({"re": 1.0, "im": 0.0}, abs=1e-12)
    assert vals["B"] == pytest.approx({"re": -1.0, "im": 0.0}, abs=1e-12)
    assert vals["C"] == pytest.approx({"re": 1.0, "im": 0.0}, abs=1e-12)
    assert vals["E"] == pytest.approx({"re": 0.0, "im": 0.0}, abs=1e-12)
    assert vals["A+B"] == pytest.approx({"re": 0.0, "im": 0.0}, abs=1e-12)
    assert vals["A*B"] == pytest.approx({"re": 0.0, "im": 0.0}, abs=1e-12)
    assert table["singular"] is False


def test_weak_value_table_blocked_is_singular():
    table = weak_value_table(builtin_scenario("fig2c"))
    assert table["singular"] is True
    assert all(v is None for v in table["values"].values())


# -- config serialization -------------------------------------------------------

FREQS = [64.0, 100.0, 250.0, 300.0, 512.0, 1000.0]


@st.composite
def vibration_maps(draw):
    mirrors = draw(st.lists(st.sampled_from("ABCEF"), unique=True, max_size=5))
    freqs = draw(st.permutations(FREQS))
    return {
        m: VibrationSpec(f, draw(st.floats(0, 0.01)), draw(st.floats(-math.pi, math.pi)))
        for m, f in zip(mirrors, freqs)
    }

configs = st.builds(
    ScenarioConfig,
    name=st.text("abcxyz_0123456789", min_size=1, max_size=12),
    outer_reflectivity=st.floats(0.05, 0.95),
    inner_reflectivity=st.floats(0.05, 0.95),
    eta=st.floats(-0.5, 0.5),
    blocks=st.lists(st.sampled_from("ABCEF"), unique=True, max_size=2).map(tuple),
    vibrations=vibration_maps(),
    pointers=st.lists(st.builds(PointerSpec, st.sampled_from("ABCEF"), st.floats(0, 0.2)),
                      max_size=3, unique_by=lambda p: p.path).map(tuple),
    noise=st.none() | st.builds(NoiseSpec, st.integers(0, 2**31), st.floats(1e3, 1e9)),
)


@settings(max_examples=100, deadline=None)
@given(configs)
def test_config_json_roundtrip(cfg):
    back = ScenarioConfig.from_json(cfg.to_json())
    assert back == cfg
    assert back.hash() == cfg.hash()
    assert back.to_json() == cfg.to_json()


def test_hash_sensitive():
    a = builtin_scenario("fig2b")
    assert a.hash() != a.with_(eta=1e-3).hash()
    assert len(a.hash()) == 16


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(colour="red"),
        lambda d: d["splitters"].update(middle=0.5),
        lambda d: d["vibrations"]["A"].update(amp=0.1),
        lambda d: d.update(eta="small"),
        lambda d: d["grid"].update(n=100.5),
        lambda d: d.update(schema_version=99),
        lambda d: d["vibrations"]["A"].update(amplitude=0.5),
        lambda d: d["vibrations"]["B"].update(frequency=300.0, phase=1.0),
        lambda d: d["vibrations"]["A"].update(frequency=300.3),
        lambda d: d["vibrations"]["A"].update(frequency=5000.0),
        lambda d: d.update(blocks=["Q"]),
    ],
)
def test_strict_rejection(mutate):
    d = builtin_scenario("fig2b").to_dict()
    mutate(d)
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(d).validate()


def test_from_json_rejects_garbage():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_json("{not json")
    with pytest.raises(ConfigError):
        ScenarioConfig.from_json("[]")


# -- runs -----------------------------------------------------------------------


def test_run_fig2b(tmp_path):
    rep = run(builtin_scenario("fig2b"), tmp_path)
    assert not rep.singular and not rep.dark
    assert rep.peaks_present == {"A": True, "B": True, "C": True, "E": False, "F": False}
    d = tmp_path / rep.files["dir"]
    for f in ("timeseries.csv", "spectrum.csv", "config.json", "report.json"):
        assert (d / f).exists()
    saved = json.loads((d / "report.json").read_text())
    assert saved["config_hash"] == rep.config_hash
    assert ScenarioConfig.from_json((d / "config.json").read_text()).hash() == rep.config_hash


def test_run_fig2c_dark_without_crash(tmp_path):
    rep = run(builtin_scenario("fig2c"), tmp_path)
    assert rep.singular and rep.dark
    assert not any(rep.peaks_present.values())
    assert all(v is None for v in rep.weak_values.values())
    json.loads(rep.to_json())


def test_run_fig2c_with_eta():
    rep = run(builtin_scenario("fig2c").with_(eta=0.01))
    assert not rep.singular
    assert rep.peaks_present["A"] and rep.peaks_present["B"]
    assert not rep.peaks_present["C"]
    assert rep.weak_values["A"]["re"] == pytest.approx(0.5, abs=1e-9)


def test_run_paradox_traces():
    rep = run(quick(builtin_scenario("paradox")))
    tr = rep.traces
    assert not tr["impossible"]
    assert tr["joint_amplitudes"]["11"] == {"re": 0.0, "im": 0.0}
    assert tr["conditional_disturbance"]["B|A=1"] == pytest.approx(0.0, abs=1e-12)
    assert tr["magnitudes"]["A"] > 0


def test_run_salih():
    rep = run(builtin_scenario("salih"))
    assert not rep.peaks_present["A"]
    assert rep.peaks["A"] < 1e-10 * rep.peaks["C"]


def test_seed_only_affects_noisy_runs():
    cfg = quick(builtin_scenario("fig2b"))
    assert run(cfg, seed=1).peaks == run(cfg, seed=2).peaks
    noisy = cfg.with_(noise=NoiseSpec(0, 1e7))
    a, b = run(noisy, seed=1), run(noisy, seed=2)
    assert a.seed == 1 and b.seed == 2
    assert a.peaks != b.peaks


def test_deterministic_artifacts(tmp_path):
    cfg = quick(builtin_scenario("fig2b")).with_(noise=NoiseSpec(3, 1e8))
    r1 = run(cfg, tmp_path / "one")
    r2 = run(cfg, tmp_path / "two")
    for f in ("timeseries.csv", "spectrum.csv", "report.json", "config.json"):
        a = (tmp_path / "one" / r1.files["dir"] / f).read_bytes()
        b = (tmp_path / "two" / r2.files["dir"] / f).read_bytes()
        assert a == b, f


# -- sweeps ---------------------------------------------------------------------


def test_trace_sweep_csv(tmp_path):
    param, values = DEFAULT_SWEEPS["trace_sweep"]
    rows = sweep(builtin_scenario("trace_sweep"), param, values, tmp_path)
    ratios = [r["ratio_EF_to_AB"] for r in rows]
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    with open(tmp_path / "sweep_epsilon.csv") as fh:
        table = list(csv.reader(fh))
    assert tuple(table[0]) == SWEEP_COLUMNS
    assert len(table) == len(values) + 1


def test_sweep_single_value_matches_run():
    cfg = quick(builtin_scenario("fig2b"))
    (row,) = sweep(cfg, "kappa", [0.005])
    rep = run(cfg)
    for m, p in rep.peaks.items():
        assert row[f"peak_{m}"] == p


def test_eta_sweep_scaling():
    # blocked C, phase imperfection: extra detector power (4/9) sin^2(eta/2) ~ eta^2
    cfg = quick(builtin_scenario("leakage_sweep")).with_(vibrations={})
    etas = [1e-3, 2e-3, 4e-3]
    rows = sweep(cfg, "eta", etas)
    for r, eta in zip(rows, etas):
        assert r["mean_power"] == pytest.approx(4 / 9 * math.sin(eta / 2) ** 2, rel=1e-9)


def test_parallel_sweep_same_order():
    cfg = quick(builtin_scenario("fig2b"))
    vals = [0.002, 0.004, 0.001]
    assert sweep(cfg, "kappa", vals, jobs=2) == sweep(cfg, "kappa", vals)


def test_sweep_errors():
    cfg = builtin_scenario("fig2b")
    with pytest.raises(ConfigError):
        sweep(cfg, "temperature", [1.0])
    with pytest.raises(ConfigError):
        sweep(cfg, "eta", [])


# -- CLI ------------------------------------------------------------------------


def test_cli_list(capsys):
    assert main(["scenarios", "list"]) == 0
    assert "fig2b" in capsys.readouterr().out.split()


def test_cli_weak_values_formats(capsys):
    assert main(["weak-values", "--scenario", "fig2b"]) == 0
    table = json.loads(capsys.readouterr().out)
    assert table["values"]["B"]["re"] == pytest.approx(-1.0)
    assert main(["weak-values", "--scenario", "fig2b", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "projector,re,im,singular"


def test_cli_run_and_validate(tmp_path, capsys):
    cfg = quick(builtin_scenario("fig2c"))
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    assert main(["validate", "--config", str(path)]) == 0
    assert cfg.hash() in capsys.readouterr().out
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["dark"] is True
    assert (tmp_path / "o" / rep["files"]["dir"] / "report.json").exists()


def test_cli_sweep_defaults(tmp_path, capsys):
    assert main(["sweep", "--scenario", "trace_sweep", "--out", str(tmp_path), "--format", "csv"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    assert (tmp_path / "sweep_epsilon.csv").exists()


def test_cli_invalid_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "name": "x", "wavelength": 1}))
    assert main(["validate", "--config", str(bad)]) == 1
    assert main(["run", "--scenario", "nope"]) == 1
    assert main(["run"]) == 1
    assert main(["sweep", "--scenario", "fig2b"]) == 1
    assert main(["sweep", "--scenario", "fig2b", "--param", "eta", "--values", "a,b"]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_runtime_exit_2(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--scenario", "salih", "--out", str(blocker)]) == 2
    assert "runtime error" in capsys.readouterr().err


def test_hash_ignores_int_float_spelling():
    cfg = builtin_scenario("fig2b")
    assert cfg.with_(sample_rate=8192).hash() == cfg.with_(sample_rate=8192.0).hash()
