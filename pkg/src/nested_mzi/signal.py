"""Quad-cell detector signal from vibrating mirrors, and its power spectrum.

The beam is a 1-D Gaussian on a uniform transverse grid. A vibrating mirror
multiplies the field on its path by ``exp(i k(t) x)``, i.e. gives it a small
transverse momentum kick. The quad cell sits in the focal plane of a lens
after the detector port, so it splits the *far-field* (momentum) power into
the halves ``u > 0`` and ``u < 0``. For a single beam kicked by ``k`` this
gives ``erf(k w / sqrt 2)``, and to first order in the kicks

    quad_diff(t) = G |<phi|psi>|^2 sum_m Re(w_m) k_m(t) w,   G = sqrt(2/pi),

where ``w_m`` is the weak value of the projector on mirror m's path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, ScenarioConfig
from .network import OpticalNetwork
from .tsvf import P, SingularPostselection, weak_value

# slope of the far-field quad-cell response per unit kick (kick in inverse waists)
HALF_OVERLAP = math.sqrt(2.0 / math.pi)

_CHUNK = 1024


@dataclass(frozen=True)
class TransverseGrid:
    n: int = 256
    half_width: float = 6.0
    waist: float = 1.0

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def x(self) -> np.ndarray:
        # cell centres, symmetric about 0 with no sample on the axis
        return -self.half_width + (np.arange(self.n) + 0.5) * self.dx

    def gaussian(self) -> np.ndarray:
        g = np.exp(-(self.x / self.waist) ** 2).astype(complex)
        return g / np.sqrt(np.sum(np.abs(g) ** 2) * self.dx)

    def power(self, field: np.ndarray) -> np.ndarray:
        return np.sum(np.abs(field) ** 2, axis=-1) * self.dx

    def quad_kernel(self) -> np.ndarray:
        """Hermitian ``Q`` with ``field^H Q field`` = far-field power(u>0) - power(u<0).

        The grid samples are treated as band-limited to ``|u| < pi/dx``, for
        which the half-plane integral has the closed form used here.
        """
        m = np.arange(self.n)
        d = m[None, :] - m[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            q = -1j * (self.dx / np.pi) * (1 - (-1.0) ** d) / d
        q[d == 0] = 0.0
        return q

    def quad(self, field: np.ndarray, kernel: Optional[np.ndarray] = None) -> np.ndarray:
        q = self.quad_kernel() if kernel is None else kernel
        return np.real(np.sum(field.conj() * (field @ q.T), axis=-1))


def grid_of(config: ScenarioConfig) -> TransverseGrid:
    return TransverseGrid(config.grid_n, config.grid_half_width, config.waist)


@dataclass
class DetectorRecord:
    sample_rate: float
    t: np.ndarray
    quad_diff: np.ndarray
    total_power: np.ndarray
    lost_power: np.ndarray = field(default=None)
    absorbed_power: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dark(self) -> bool:
        return bool(np.all(self.total_power == 0.0))

    def to_csv(self, path) -> None:
        write_csv(path, ("t", "quad_diff", "total_power"),
                  zip(self.t, self.quad_diff, self.total_power))


@dataclass
class PowerSpectrum:
    freqs: np.ndarray
    power: np.ndarray
    window: str = "rectangular"

    def at(self, f: float) -> float:
        i = int(np.argmin(np.abs(self.freqs - f)))
        if abs(self.freqs[i] - f) > 1e-9 * max(1.0, abs(f)):
            raise KeyError(f"{f} Hz is not a bin of this spectrum")
        return float(self.power[i])

    def to_csv(self, path) -> None:
        write_csv(path, ("freq_hz", "power"), zip(self.freqs, self.power))


def write_csv(path, header: Sequence[str], rows) -> None:
    """Write rows of numbers/strings; floats use ``repr`` so values round-trip exactly."""
    if hasattr(path, "write"):
        _write_rows(path, header, rows)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, header, rows)


def _write_rows(fh, header, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])


def _stage_kicks(network: OpticalNetwork):
    """Per stage: list of (rail, VibrationSpec) for vibrating mirrors in that stage."""
    kicks: dict[int, list] = {}
    for k, mirror in network.mirrors():
        if mirror.vibration is not None and mirror.vibration.amplitude > 0:
            kicks.setdefault(k, []).append((network.rail(mirror.label, k), mirror.vibration))
    return kicks


def propagate_fields(network: OpticalNetwork, grid: TransverseGrid, t: np.ndarray) -> np.ndarray:
    """Transverse fields on every rail of the final slice, shape ``(len(t), rails, n)``."""
    kicks = _stage_kicks(network)
    x = grid.x
    fields = np.zeros((len(t), network.n_rails, grid.n), dtype=complex)
    fields[:, network.rail(network.source, 0), :] = grid.gaussian()
    for k in range(1, network.n_slices):
        fields = np.einsum("ij,tjn->tin", network.stage_matrix(k), fields)
        for rail, vib in kicks.get(k, ()):
            kappa = vib.kick(t) / grid.waist
            fields[:, rail, :] *= np.exp(1j * kappa[:, None] * x[None, :])
    return fields


def synthesize(config: ScenarioConfig, t: Optional[np.ndarray] = None) -> DetectorRecord:
    """Detector record for ``config``.

    Samples are computed independently, so the record is the same however
    it is chunked.
    """
    config.validate()
    grid = grid_of(config)
    if grid.waist < 4 * grid.dx:
        raise ConfigError("beam waist spans fewer than 4 grid steps")
    network = config.network()
    if t is None:
        t = np.arange(config.n_samples) / config.sample_rate
    t = np.asarray(t, dtype=float)
    q = grid.quad_kernel()
    det = network.rail(network.detector, network.n_slices - 1)
    quad = np.empty(len(t))
    total = np.empty(len(t))
    lost = np.empty(len(t))
    for start in range(0, len(t), _CHUNK):
        sl = slice(start, start + _CHUNK)
        fields = propagate_fields(network, grid, t[sl])
        d = fields[:, det, :]
        quad[sl] = grid.quad(d, q)
        total[sl] = grid.power(d)
        lost[sl] = grid.power(fields).sum(axis=1) - total[sl]
    absorbed = 1.0 - total - lost
    if config.noise is not None:
        quad, total = _shot_noise(quad, total, config.noise.seed, config.noise.photon_budget)
    return DetectorRecord(config.sample_rate, t, quad, total, lost, absorbed)


def _shot_noise(quad, total, seed, budget):
    rng = np.random.default_rng(seed)
    plus = np.clip(0.5 * (total + quad), 0.0, None)
    minus = np.clip(0.5 * (total - quad), 0.0, None)
    n_plus = rng.poisson(budget * plus)
    n_minus = rng.poisson(budget * minus)
    return (n_plus - n_minus) / budget, (n_plus + n_minus) / budget


def first_order_signal(config: ScenarioConfig, t) -> np.ndarray:
    """Linear-response prediction of ``quad_diff`` at time(s) ``t``."""
    network = config.network()
    amp = 0.0
    wv = {}
    for k, mirror in network.mirrors():
        vib = mirror.vibration
        if vib is None or vib.amplitude == 0:
            continue
        rep = weak_value(network, P(mirror.label, k))
        if rep.singular:
            raise SingularPostselection("first-order prediction undefined for singular post-selection")
        wv[mirror.label] = (rep.value.real, vib)
    rep = weak_value(network, P(network.detector))
    if rep.singular:
        raise SingularPostselection("first-order prediction undefined for singular post-selection")
    prob = abs(rep.overlap) ** 2
    t = np.asarray(t, dtype=float)
    amp = np.zeros_like(t)
    for re_w, vib in wv.values():
        amp = amp + re_w * vib.kick(t)
    return HALF_OVERLAP * prob * amp


# -- spectra -----------------------------------------------------------------


def fft_radix2(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 decimation-in-time DFT, ``X_k = sum_n x_n exp(-2 pi i k n / N)``."""
    x = np.asarray(x, dtype=complex)
    n = len(x)
    if n == 0 or n & (n - 1):
        raise ValueError(f"length must be a power of two, got {n}")
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    a = x[rev].copy()
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        a = a.reshape(-1, size)
        even = a[:, :half].copy()
        odd = a[:, half:] * tw
        a[:, :half] = even + odd
        a[:, half:] = even - odd
        a = a.reshape(-1)
        size *= 2
    return a


def dft_direct(x: np.ndarray) -> np.ndarray:
    """O(N^2) reference transform."""
    x = np.asarray(x, dtype=complex)
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


def _window(name: str, n: int) -> np.ndarray:
    if name == "rectangular":
        return np.ones(n)
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    raise ValueError(f"unknown window {name!r}")


def power_spectrum(record, window: str = "rectangular", fit: str = "pad") -> PowerSpectrum:
    """One-sided periodogram of ``record.quad_diff`` (or of a bare array).

    Normalized so that a bin-aligned sinusoid of amplitude ``a`` gives a
    single bin of power ``a**2 / 2`` and the bins sum to the mean square of
    the (windowed, power-normalized) series.

    Parameters
    ----------
    window : {"rectangular", "hann"}
    fit : {"pad", "truncate"}
        How to reach a power-of-two length.
    """
    if isinstance(record, DetectorRecord):
        x, rate = record.quad_diff, record.sample_rate
    else:
        x, rate = record
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n == 0:
        raise ValueError("empty record")
    m = 1 << (n - 1).bit_length()
    if m != n:
        if fit == "pad":
            x = np.concatenate([x, np.zeros(m - n)])
        elif fit == "truncate":
            m = 1 << (n.bit_length() - 1)
            x = x[:m]
        else:
            raise ValueError(f"unknown fit policy {fit!r}")
    w = _window(window, len(x))
    n = len(x)
    spec = fft_radix2(x * w)
    half = spec[: n // 2 + 1]
    p = np.abs(half) ** 2 / (n * np.sum(w**2))
    p[1 : n // 2] *= 2.0
    freqs = np.arange(n // 2 + 1) * rate / n
    return PowerSpectrum(freqs, p, window)


def peak_table(spectrum: PowerSpectrum, config: ScenarioConfig) -> dict[str, float]:
    """Spectral power at each vibrating mirror's frequency."""
    return {m: spectrum.at(v.frequency) for m, v in sorted(config.vibrations.items())}


def convergence_check(config: ScenarioConfig, levels: Sequence[float], t=None) -> list[dict]:
    """Full model against the first-order prediction at several kick strengths.

    Each level rescales every vibration to that amplitude. Returns rows with
    ``kick`` and ``discrepancy = max_t |full - first_order| / kick``.
    """
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("need at least three levels")
    rows = []
    for lev in levels:
        vib = {m: type(v)(v.frequency, lev, v.phase) for m, v in config.vibrations.items()}
        cfg = config.with_(vibrations=vib, noise=None)
        rec = synthesize(cfg, t)
        if lev == 0:
            rows.append({"kick": lev, "discrepancy": 0.0})
            continue
        pred = first_order_signal(cfg, rec.t)
        rows.append({"kick": lev, "discrepancy": float(np.max(np.abs(rec.quad_diff - pred)) / lev)})
    return rows
