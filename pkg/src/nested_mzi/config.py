"""Scenario configuration: dataclass, JSON (de)serialization and validation."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional

from .network import (
    INNER_REFLECTIVITY,
    MIRRORS,
    OUTER_REFLECTIVITY,
    OpticalNetwork,
    VibrationSpec,
    build_network,
)
from .trace import PointerSpec

SCHEMA_VERSION = 1

# f_A..f_F in Hz; D has no mirror, so its entry is unused
DEFAULT_FREQUENCIES = {"A": 300.0, "B": 282.0, "C": 318.0, "D": 264.0, "E": 336.0, "F": 348.0}
DEFAULT_KICK = 0.005


class ConfigError(ValueError):
    """Invalid scenario description."""


@dataclass(frozen=True)
class NoiseSpec:
    seed: int
    photon_budget: float

    def __post_init__(self):
        if not self.photon_budget > 0:
            raise ConfigError("photon_budget must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    outer_reflectivity: float = OUTER_REFLECTIVITY
    inner_reflectivity: float = INNER_REFLECTIVITY
    eta: float = 0.0
    blocks: tuple[str, ...] = ()
    vibrations: Mapping[str, VibrationSpec] = field(default_factory=dict)
    pointers: tuple[PointerSpec, ...] = ()
    duration: float = 1.0
    sample_rate: float = 8192.0
    grid_n: int = 256
    grid_half_width: float = 6.0
    waist: float = 1.0
    noise: Optional[NoiseSpec] = None

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def network(self) -> OpticalNetwork:
        return build_network(
            outer=self.outer_reflectivity,
            inner=self.inner_reflectivity,
            eta=self.eta,
            blocks=self.blocks,
            vibrations=self.vibrations,
        )

    def validate(self) -> "ScenarioConfig":
        for r, what in ((self.outer_reflectivity, "outer"), (self.inner_reflectivity, "inner")):
            if not 0.0 <= r <= 1.0:
                raise ConfigError(f"{what} reflectivity must lie in [0, 1], got {r}")
        if not math.isfinite(self.eta):
            raise ConfigError("eta must be finite")
        if not self.duration > 0 or not self.sample_rate > 0:
            raise ConfigError("duration and sample_rate must be positive")
        if abs(self.duration * self.sample_rate - self.n_samples) > 1e-9:
            raise ConfigError("duration * sample_rate must be an integer number of samples")
        for m in self.vibrations:
            if m not in MIRRORS:
                raise ConfigError(f"no vibrating mirror at {m!r}; mirrors are {MIRRORS}")
        freqs = [v.frequency for v in self.vibrations.values()]
        if len(set(freqs)) != len(freqs) and not self._common_mode_ok():
            raise ConfigError(f"vibration frequencies must be distinct, got {sorted(freqs)}")
        for m, v in self.vibrations.items():
            cycles = v.frequency * self.duration
            if abs(cycles - round(cycles)) > 1e-9:
                raise ConfigError(f"frequency of {m} ({v.frequency} Hz) is not bin-aligned for duration {self.duration} s")
            if v.frequency >= self.sample_rate / 2:
                raise ConfigError(f"frequency of {m} is above Nyquist")
        if self.grid_n < 128:
            raise ConfigError(f"grid needs at least 128 points, got {self.grid_n}")
        if self.grid_half_width < 4 * self.waist:
            raise ConfigError("grid half-width must be at least 4 beam waists")
        if self.waist < 4 * (2 * self.grid_half_width / self.grid_n):
            raise ConfigError("beam waist spans fewer than 4 grid steps")
        try:
            net = self.network()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for p in self.pointers:
            if p.slice is None:
                try:
                    net.locate(p.path)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
        return self

    def _common_mode_ok(self) -> bool:
        # identical drive on several mirrors (the common-mode scenario) is allowed
        groups: dict[float, set] = {}
        for v in self.vibrations.values():
            groups.setdefault(v.frequency, set()).add((v.amplitude, v.phase))
        return all(len(g) == 1 for g in groups.values())

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        f = float
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "splitters": {"outer": f(self.outer_reflectivity), "inner": f(self.inner_reflectivity)},
            "eta": f(self.eta),
            "blocks": list(self.blocks),
            "vibrations": {
                m: {"frequency": f(v.frequency), "amplitude": f(v.amplitude), "phase": f(v.phase)}
                for m, v in sorted(self.vibrations.items())
            },
            "pointers": [
                {"path": p.path, "epsilon": f(p.epsilon), "slice": p.slice} for p in self.pointers
            ],
            # numbers are coerced so 4096 and 4096.0 serialize (and hash) alike
            "run": {"duration": f(self.duration), "sample_rate": f(self.sample_rate)},
            "grid": {"n": int(self.grid_n), "half_width": f(self.grid_half_width), "waist": f(self.waist)},
            "noise": None
            if self.noise is None
            else {"seed": int(self.noise.seed), "photon_budget": f(self.noise.photon_budget)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScenarioConfig":
        d = _strict(data, "config", required={"schema_version"}, allowed={
            "schema_version", "name", "splitters", "eta", "blocks", "vibrations",
            "pointers", "run", "grid", "noise",
        })
        if d["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {d['schema_version']!r}")
        kw: dict[str, Any] = {}
        if "name" in d:
            kw["name"] = str(d["name"])
        if "splitters" in d:
            s = _strict(d["splitters"], "splitters", allowed={"outer", "inner"})
            if "outer" in s:
                kw["outer_reflectivity"] = _num(s["outer"], "splitters.outer")
            if "inner" in s:
                kw["inner_reflectivity"] = _num(s["inner"], "splitters.inner")
        if "eta" in d:
            kw["eta"] = _num(d["eta"], "eta")
        if "blocks" in d:
            if not isinstance(d["blocks"], list):
                raise ConfigError("blocks must be a list of path labels")
            kw["blocks"] = tuple(str(b) for b in d["blocks"])
        if "vibrations" in d:
            if not isinstance(d["vibrations"], Mapping):
                raise ConfigError("vibrations must map mirror labels to specs")
            vib = {}
            for m, v in d["vibrations"].items():
                v = _strict(v, f"vibrations.{m}", required={"frequency", "amplitude"},
                            allowed={"frequency", "amplitude", "phase"})
                try:
                    vib[m] = VibrationSpec(
                        _num(v["frequency"], "frequency"),
                        _num(v["amplitude"], "amplitude"),
                        _num(v.get("phase", 0.0), "phase"),
                    )
                except ValueError as exc:
                    raise ConfigError(f"vibrations.{m}: {exc}") from exc
            kw["vibrations"] = vib
        if "pointers" in d:
            ptrs = []
            for i, p in enumerate(d["pointers"]):
                p = _strict(p, f"pointers[{i}]", required={"path", "epsilon"},
                            allowed={"path", "epsilon", "slice"})
                try:
                    ptrs.append(PointerSpec(str(p["path"]), _num(p["epsilon"], "epsilon"), p.get("slice")))
                except ValueError as exc:
                    raise ConfigError(f"pointers[{i}]: {exc}") from exc
            kw["pointers"] = tuple(ptrs)
        if "run" in d:
            r = _strict(d["run"], "run", allowed={"duration", "sample_rate"})
            if "duration" in r:
                kw["duration"] = _num(r["duration"], "run.duration")
            if "sample_rate" in r:
                kw["sample_rate"] = _num(r["sample_rate"], "run.sample_rate")
        if "grid" in d:
            g = _strict(d["grid"], "grid", allowed={"n", "half_width", "waist"})
            if "n" in g:
                if not isinstance(g["n"], int):
                    raise ConfigError("grid.n must be an integer")
                kw["grid_n"] = g["n"]
            if "half_width" in g:
                kw["grid_half_width"] = _num(g["half_width"], "grid.half_width")
            if "waist" in g:
                kw["waist"] = _num(g["waist"], "grid.waist")
        if d.get("noise") is not None:
            n = _strict(d["noise"], "noise", required={"seed", "photon_budget"},
                        allowed={"seed", "photon_budget"})
            if not isinstance(n["seed"], int):
                raise ConfigError("noise.seed must be an integer")
            kw["noise"] = NoiseSpec(n["seed"], _num(n["photon_budget"], "noise.photon_budget"))
        return cls(**kw).validate()

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def _strict(obj, where: str, allowed: set, required: set = frozenset()) -> Mapping[str, Any]:
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where} must be an object")
    extra = set(obj) - set(allowed)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {sorted(extra)}")
    missing = set(required) - set(obj)
    if missing:
        raise ConfigError(f"{where}: missing field(s) {sorted(missing)}")
    return obj


def _num(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{where} must be a number, got {x!r}")
    return float(x)
