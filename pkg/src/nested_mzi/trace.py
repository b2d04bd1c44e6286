"""Two-level environment pointers weakly coupled to the photon's path.

Each pointer starts in ``|0>`` and is rotated by an angle ``epsilon``
(``|0> -> cos e |0> + sin e |1>``) whenever the photon occupies its path.
The joint photon-pointer state is propagated through the network and then
projected on the photon reaching the detector, which leaves a (sub-normalized)
pure state of the pointers alone.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .network import NetworkError, OpticalNetwork, build_network
from .tsvf import SINGULAR_THRESHOLD

MAX_POINTERS = 6
GROUND = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)


class ImpossiblePostselection(ArithmeticError):
    """The photon never reaches the post-selected port."""


@dataclass(frozen=True)
class PointerSpec:
    path: str
    epsilon: float
    slice: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= math.pi / 2:
            raise ValueError(f"coupling must lie in [0, pi/2], got {self.epsilon}")


@dataclass(frozen=True)
class InstrumentedNetwork:
    network: OpticalNetwork
    pointers: tuple[PointerSpec, ...]
    slices: tuple[int, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(p.path for p in self.pointers)

    def index(self, location: Union[str, int]) -> int:
        if isinstance(location, int):
            return location
        try:
            return self.labels.index(location)
        except ValueError:
            raise NetworkError(f"no pointer at {location!r}") from None


@dataclass(frozen=True)
class JointPointerState:
    """Pointer amplitudes after post-selecting the photon.

    ``amplitudes`` has shape ``(2,) * n`` and is not renormalized: its squared
    norm is the post-selection probability.
    """

    labels: tuple[str, ...]
    amplitudes: np.ndarray

    @property
    def probability(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def amplitude(self, **outcomes: int) -> complex:
        idx = tuple(outcomes.get(lab, 0) for lab in self.labels)
        return complex(self.amplitudes[idx])

    def normalized(self) -> np.ndarray:
        p = self.probability
        if p == 0.0:
            raise ImpossiblePostselection("post-selection probability is zero")
        return self.amplitudes / np.sqrt(p)


def instrument(network: OpticalNetwork, pointers: Sequence[PointerSpec]) -> InstrumentedNetwork:
    """Attach pointers to ``network``; a pointer without a slice sits where its path first appears."""
    pointers = tuple(pointers)
    if len(pointers) > MAX_POINTERS:
        raise ValueError(f"at most {MAX_POINTERS} pointers are supported, got {len(pointers)}")
    slices = []
    for p in pointers:
        s = network.locate(p.path) if p.slice is None else p.slice
        if not 0 <= s < network.n_slices:
            raise NetworkError(f"slice {s} out of range for pointer at {p.path!r}")
        network.rail(p.path, s)
        slices.append(s)
    if len(set(zip((p.path for p in pointers), slices))) != len(pointers):
        raise NetworkError("two pointers share one location")
    return InstrumentedNetwork(network, pointers, tuple(slices))


def _rotate(state: np.ndarray, rail: int, axis: int, eps: float) -> np.ndarray:
    c, s = math.cos(eps), math.sin(eps)
    rot = np.array([[c, -s], [s, c]])
    sub = np.moveaxis(state[rail], axis, 0)
    sub = np.tensordot(rot, sub, axes=(1, 0))
    out = state.copy()
    out[rail] = np.moveaxis(sub, 0, axis)
    return out


def propagate_joint(inet: InstrumentedNetwork) -> list[np.ndarray]:
    """Joint photon-pointer state on every slice, shape ``(rails, 2, ..., 2)``.

    Couplings assigned to a slice act on the state of that slice (after the
    preceding stage and before the next one); the returned entry already
    includes them.
    """
    net = inet.network
    n = len(inet.pointers)
    state = np.zeros((net.n_rails,) + (2,) * n, dtype=complex)
    state[(net.rail(net.source, 0),) + (0,) * n] = 1.0
    out = []
    for k in range(net.n_slices):
        if k > 0:
            state = np.tensordot(net.stage_matrix(k), state, axes=(1, 0))
        for j, (p, s) in enumerate(zip(inet.pointers, inet.slices)):
            if s == k and p.epsilon != 0.0:
                state = _rotate(state, net.rail(p.path, k), j, p.epsilon)
        out.append(state)
    return out


def path_norm(inet: InstrumentedNetwork, path: str, slice: Optional[int] = None) -> float:
    """Norm of the joint forward amplitude on ``path`` (summed over pointer states)."""
    net = inet.network
    s = net.locate(path) if slice is None else slice
    state = propagate_joint(inet)[s][net.rail(path, s)]
    return float(np.sqrt(np.vdot(state, state).real))


def joint_pointer_state(inet: InstrumentedNetwork, postselect_port: Optional[str] = None) -> JointPointerState:
    net = inet.network
    port = net.detector if postselect_port is None else postselect_port
    final = propagate_joint(inet)[-1]
    amps = final[net.rail(port, net.n_slices - 1)]
    jps = JointPointerState(inet.labels, amps)
    if math.sqrt(jps.probability) < SINGULAR_THRESHOLD:
        raise ImpossiblePostselection(f"photon never reaches {port!r}")
    return jps


def postselection_probability(inet: InstrumentedNetwork, postselect_port: Optional[str] = None) -> float:
    net = inet.network
    port = net.detector if postselect_port is None else postselect_port
    amps = propagate_joint(inet)[-1][net.rail(port, net.n_slices - 1)]
    return float(np.vdot(amps, amps).real)


def _single_dm(psi: np.ndarray, j: int) -> np.ndarray:
    m = np.moveaxis(psi, j, 0).reshape(2, -1)
    return m @ m.conj().T


def reduced_dm(jps: JointPointerState, location: Union[str, int]) -> np.ndarray:
    """Density matrix of one pointer, tracing out all others."""
    j = location if isinstance(location, int) else _label_index(jps, location)
    return _single_dm(jps.normalized(), j)


def conditional_dm(
    jps: JointPointerState,
    detected_at: Union[str, int],
    outcome: int = 1,
    target: Union[str, int, None] = None,
) -> np.ndarray:
    """State of ``target`` after finding pointer ``detected_at`` in ``outcome``.

    With exactly two pointers ``target`` defaults to the other one.
    """
    i = detected_at if isinstance(detected_at, int) else _label_index(jps, detected_at)
    if target is None:
        others = [k for k in range(len(jps.labels)) if k != i]
        if len(others) != 1:
            raise ValueError("target pointer must be given when more than two pointers exist")
        (t,) = others
    else:
        t = target if isinstance(target, int) else _label_index(jps, target)
    branch = np.take(jps.amplitudes, outcome, axis=i)
    norm = float(np.vdot(branch, branch).real)
    if norm == 0.0:
        raise ValueError(f"outcome {outcome} of pointer {jps.labels[i]!r} has zero probability")
    return _single_dm(branch / np.sqrt(norm), t if t < i else t - 1)


def _label_index(jps: JointPointerState, label: str) -> int:
    try:
        return jps.labels.index(label)
    except ValueError:
        raise NetworkError(f"no pointer at {label!r}") from None


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho - sigma))))


def ground_distance(rho: np.ndarray) -> float:
    """Trace distance from a unit-trace qubit state to ``|0><0|``.

    ``rho - |0><0|`` is ``[[-p, c], [c*, p]]`` with ``p = rho[1, 1]``, whose
    eigenvalues are ``+-sqrt(p^2 + |c|^2)``. Written this way it stays
    accurate when the disturbance is far below machine epsilon relative to 1.
    """
    return math.hypot(rho[1, 1].real, abs(rho[0, 1]))


def trace_magnitude(
    inet: InstrumentedNetwork, location: Union[str, int], postselect_port: Optional[str] = None
) -> float:
    """Trace distance between the post-selected pointer state and the undisturbed ``|0><0|``."""
    jps = joint_pointer_state(inet, postselect_port)
    return ground_distance(reduced_dm(jps, location))


SWEEP_COLUMNS = ("epsilon", "mag_A", "mag_B", "mag_C", "mag_E", "mag_F", "ratio_EF_to_AB")
SWEEP_PATHS = ("A", "B", "C", "E", "F")


def trace_row(epsilon: float, network: Optional[OpticalNetwork] = None) -> dict:
    """Trace magnitudes with identical couplings at A, B, C, E and F.

    ``ratio_EF_to_AB`` is ``(mag_E + mag_F) / (mag_A + mag_B)``, or ``None``
    when both A and B magnitudes vanish.
    """
    network = build_network() if network is None else network
    inet = instrument(network, [PointerSpec(p, epsilon) for p in SWEEP_PATHS])
    jps = joint_pointer_state(inet)
    mags = {p: ground_distance(reduced_dm(jps, p)) for p in SWEEP_PATHS}
    den = mags["A"] + mags["B"]
    ratio = (mags["E"] + mags["F"]) / den if den > 0 else None
    row = {"epsilon": epsilon}
    row.update({f"mag_{p}": m for p, m in mags.items()})
    row["ratio_EF_to_AB"] = ratio
    return row


def trace_ratio_sweep(epsilons: Iterable[float], network: Optional[OpticalNetwork] = None) -> list[dict]:
    """One row per coupling, in the given order."""
    rows = []
    for eps in epsilons:
        if not 0.0 <= eps <= 0.2:
            raise ValueError(f"sweep couplings must lie in [0, 0.2], got {eps}")
        rows.append(trace_row(eps, network))
    return rows


def write_sweep_csv(path, rows: Sequence[dict]) -> None:
    """CSV with exactly the ``SWEEP_COLUMNS`` header; an undefined ratio is left empty."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow(["" if r[c] is None else repr(float(r[c])) for c in SWEEP_COLUMNS])


def fit_exponent(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log y against log x, with its R^2."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2
