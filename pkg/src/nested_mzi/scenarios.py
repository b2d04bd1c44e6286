"""Built-in scenarios, single runs and parameter sweeps."""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .config import DEFAULT_FREQUENCIES, DEFAULT_KICK, ConfigError, NoiseSpec, ScenarioConfig
from .network import MIRRORS, VibrationSpec
from .signal import peak_table, power_spectrum, synthesize, write_csv
from .trace import (
    GROUND,
    ImpossiblePostselection,
    PointerSpec,
    SWEEP_COLUMNS,
    SWEEP_PATHS,
    conditional_dm,
    ground_distance,
    instrument,
    joint_pointer_state,
    reduced_dm,
    trace_distance,
    trace_row,
)
from .tsvf import P, weak_value

# spectral power below this counts as "no peak"
PEAK_FLOOR = 1e-22


def _fig2b() -> ScenarioConfig:
    vib = {m: VibrationSpec(DEFAULT_FREQUENCIES[m], DEFAULT_KICK) for m in MIRRORS}
    return ScenarioConfig(name="fig2b", vibrations=vib)


def _fig2c() -> ScenarioConfig:
    return _fig2b().with_(name="fig2c", blocks=("C",))


def _salih() -> ScenarioConfig:
    vib = dict(_fig2b().vibrations)
    vib["B"] = VibrationSpec(vib["A"].frequency, vib["A"].amplitude, vib["A"].phase)
    return ScenarioConfig(name="salih", vibrations=vib)


def _paradox() -> ScenarioConfig:
    return ScenarioConfig(name="paradox", pointers=(PointerSpec("A", 0.05), PointerSpec("B", 0.05)))


def _trace_sweep() -> ScenarioConfig:
    return ScenarioConfig(name="trace_sweep", pointers=tuple(PointerSpec(p, 0.1) for p in SWEEP_PATHS))


def _leakage_sweep() -> ScenarioConfig:
    return _fig2c().with_(name="leakage_sweep")


_BUILTINS = {
    "fig2b": _fig2b,
    "fig2c": _fig2c,
    "salih": _salih,
    "leakage_sweep": _leakage_sweep,
    "paradox": _paradox,
    "trace_sweep": _trace_sweep,
}

DEFAULT_SWEEPS = {
    "leakage_sweep": ("eta", [0.0, 1e-3, 1e-2]),
    "trace_sweep": ("epsilon", [0.1, 0.05, 0.025, 0.0125]),
}

SWEEP_PARAMETERS = ("epsilon", "eta", "kappa")


def scenario_names() -> list[str]:
    return list(_BUILTINS)


def builtin_scenario(name: str) -> ScenarioConfig:
    try:
        return _BUILTINS[name]().validate()
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; valid names: {', '.join(_BUILTINS)}") from None


@dataclass
class RunReport:
    name: str
    config_hash: str
    seed: Optional[int]
    version: str
    overlap: dict
    singular: bool
    dark: bool
    weak_values: dict
    peaks: dict = field(default_factory=dict)
    peaks_present: dict = field(default_factory=dict)
    detector: dict = field(default_factory=dict)
    traces: Optional[dict] = None
    files: dict = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _cplx(z: Optional[complex]):
    return None if z is None else {"re": float(z.real), "im": float(z.imag)}


def weak_value_table(config: ScenarioConfig) -> dict:
    """Weak values of the mirror projectors plus the A+B sum and A*B product."""
    net = config.network()
    exprs = {m: P(m) for m in MIRRORS}
    exprs["A+B"] = P("A") + P("B")
    exprs["A*B"] = P("A") * P("B")
    table = {}
    for name, expr in exprs.items():
        rep = weak_value(net, expr)
        table[name] = _cplx(rep.value)
    rep = weak_value(net, P(net.detector))
    return {"values": table, "overlap": _cplx(rep.overlap), "singular": bool(rep.singular)}


def _trace_summary(config: ScenarioConfig) -> dict:
    inet = instrument(config.network(), config.pointers)
    try:
        jps = joint_pointer_state(inet)
    except ImpossiblePostselection:
        return {"postselection_probability": 0.0, "impossible": True}
    labels = jps.labels
    out: dict[str, Any] = {
        "postselection_probability": jps.probability,
        "impossible": False,
        "magnitudes": {lab: ground_distance(reduced_dm(jps, lab)) for lab in labels},
        "joint_amplitudes": {
            "".join(map(str, idx)): _cplx(complex(jps.amplitudes[idx]))
            for idx in np.ndindex(*jps.amplitudes.shape)
        },
    }
    if len(labels) == 2:
        cond = {}
        for i, lab in enumerate(labels):
            other = labels[1 - i]
            try:
                rho = conditional_dm(jps, lab, 1)
                cond[f"{other}|{lab}=1"] = trace_distance(rho, GROUND)
            except ValueError:
                cond[f"{other}|{lab}=1"] = None
        out["conditional_disturbance"] = cond
    return out


def run(config: ScenarioConfig, out: Optional[os.PathLike] = None, seed: Optional[int] = None) -> RunReport:
    """Weak values, detector record, spectrum and peaks (plus traces if pointers are set).

    Impossible post-selection does not raise: the report is marked dark.
    With ``out`` given, CSV artifacts and ``report.json`` are written to a
    directory named after the scenario and config hash.
    """
    if seed is not None:
        config = config.with_(noise=NoiseSpec(seed, config.noise.photon_budget)) if config.noise else config
    config.validate()
    wv = weak_value_table(config)
    record = synthesize(config)
    spectrum = power_spectrum(record)
    peaks = peak_table(spectrum, config)
    seed_used = config.noise.seed if config.noise else seed
    report = RunReport(
        name=config.name,
        config_hash=config.hash(),
        seed=seed_used,
        version=__version__,
        overlap=wv["overlap"],
        singular=wv["singular"],
        dark=wv["singular"],
        weak_values=wv["values"],
        peaks=peaks,
        peaks_present={m: p > PEAK_FLOOR for m, p in peaks.items()},
        detector={
            "mean_power": float(np.mean(record.total_power)),
            "max_power": float(np.max(record.total_power)),
            "all_samples_dark": record.dark,
        },
        traces=_trace_summary(config) if config.pointers else None,
    )
    if out is not None:
        d = Path(out) / f"{config.name}-{report.config_hash}"
        d.mkdir(parents=True, exist_ok=True)
        record.to_csv(d / "timeseries.csv")
        spectrum.to_csv(d / "spectrum.csv")
        (d / "config.json").write_text(config.to_json() + "\n")
        report.files = {"dir": d.name, "timeseries": "timeseries.csv", "spectrum": "spectrum.csv",
                        "config": "config.json", "report": "report.json"}
        (d / "report.json").write_text(report.to_json() + "\n")
    return report


def _with_parameter(config: ScenarioConfig, parameter: str, value: float) -> ScenarioConfig:
    if parameter == "eta":
        return config.with_(eta=float(value), name=f"{config.name}_eta={value:g}")
    if parameter == "kappa":
        vib = {m: VibrationSpec(v.frequency, float(value), v.phase) for m, v in config.vibrations.items()}
        return config.with_(vibrations=vib, name=f"{config.name}_kappa={value:g}")
    if parameter == "epsilon":
        paths = [p.path for p in config.pointers] or list(SWEEP_PATHS)
        ptrs = tuple(PointerSpec(p, float(value)) for p in paths)
        return config.with_(pointers=ptrs, name=f"{config.name}_epsilon={value:g}")
    raise ConfigError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")


def _sweep_row(args) -> dict:
    config, parameter, value, out = args
    row: dict[str, Any] = {"parameter": parameter, "value": value}
    if parameter == "epsilon":
        paths = {p.path for p in config.pointers}
        if paths == set(SWEEP_PATHS):
            row.update(trace_row(value, config.network()))
            return row
        summary = _trace_summary(config)
        row["postselection_probability"] = summary["postselection_probability"]
        for lab, m in summary.get("magnitudes", {}).items():
            row[f"mag_{lab}"] = m
        return row
    rep = run(config, out)
    row.update({
        "singular": rep.singular,
        "mean_power": rep.detector["mean_power"],
        "max_power": rep.detector["max_power"],
    })
    for m, p in sorted(rep.peaks.items()):
        row[f"peak_{m}"] = p
    return row


def sweep(
    config: ScenarioConfig,
    parameter: str,
    values: Sequence[float],
    out: Optional[os.PathLike] = None,
    jobs: int = 1,
) -> list[dict]:
    """Rerun ``config`` with ``parameter`` set to each value.

    Rows come back in the order of ``values`` regardless of ``jobs``. With
    ``out`` given, each row writes its run artifacts to its own directory
    and the table goes to ``sweep_<parameter>.csv``.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    tasks = [(_with_parameter(config, parameter, v).validate(), parameter, v, out) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_table(Path(out) / f"sweep_{parameter}.csv", rows)
    return rows


def write_table(path, rows: list[dict]) -> None:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    if all(c in cols for c in SWEEP_COLUMNS):
        cols = list(SWEEP_COLUMNS)
    write_csv(path, cols, ([_cell(r.get(c)) for c in cols] for r in rows))


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, str):
        return v
    return float(v)
