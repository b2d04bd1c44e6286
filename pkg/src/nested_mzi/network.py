"""Staged linear-optical networks carrying a single photon over labelled paths.

A network is a feed-forward list of stages acting on a fixed set of rails.
Each slice (the state between two stages) attaches a path label to every
rail, so the same rail can be called ``E`` before the inner splitter and
``A`` after it. Slice 0 is the input; slice ``k`` is the state after stage
``k``.

Phase convention: a splitter with power reflectivity ``r`` maps its two
inputs ``(a, b)`` to ``(t a + i sqrt(r) b, i sqrt(r) a + t b)`` with
``t = sqrt(1 - r)``. Fixed mirrors are identities (global phase only).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

# the outer interferometer is locked so that the A and B weak values come out +1/-1
OUTER_PHASE = np.pi

# default ratios: 2/3 of the power goes into the inner interferometer, 1/3 to C
OUTER_REFLECTIVITY = 1.0 / 3.0
INNER_REFLECTIVITY = 0.5


class NetworkError(ValueError):
    """Raised for inconsistent wiring or unknown paths."""


@dataclass(frozen=True)
class VibrationSpec:
    """Sinusoidal tilt of a mirror, expressed as a transverse momentum kick.

    ``amplitude`` is the peak kick in units of the inverse beam waist.
    """

    frequency: float
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError(f"vibration frequency must be positive, got {self.frequency}")
        if not 0 <= self.amplitude <= 0.01:
            raise ValueError(
                f"vibration amplitude must lie in [0, 0.01] (weak coupling), got {self.amplitude}"
            )

    def kick(self, t):
        """Instantaneous kick (units of inverse waist) at time(s) ``t``."""
        return self.amplitude * np.sin(2 * np.pi * self.frequency * np.asarray(t) + self.phase)


@dataclass(frozen=True)
class BeamSplitter:
    inputs: tuple[str, str]
    outputs: tuple[str, str]
    reflectivity: float
    convention: str = "symmetric"


@dataclass(frozen=True)
class Mirror:
    label: str
    vibration: Optional[VibrationSpec] = None


@dataclass(frozen=True)
class Phase:
    path: str
    phi: float


@dataclass(frozen=True)
class Block:
    path: str


@dataclass(frozen=True)
class Detector:
    port: str


Element = Union[BeamSplitter, Mirror, Phase, Block, Detector]


def beam_splitter_matrix(r: float, convention: str = "symmetric") -> np.ndarray:
    """2x2 unitary of a lossless splitter with power reflectivity ``r``.

    Parameters
    ----------
    r : float
        Power reflectivity in [0, 1].
    convention : {"symmetric", "real"}
        ``"symmetric"`` puts a factor ``i`` on both reflected entries;
        ``"real"`` uses the real rotation ``[[t, r], [-r, t]]``.
    """
    if not 0.0 <= r <= 1.0 or np.isnan(r):
        raise ValueError(f"reflectivity must lie in [0, 1], got {r}")
    t = np.sqrt(1.0 - r)
    s = np.sqrt(r)
    if convention == "symmetric":
        return np.array([[t, 1j * s], [1j * s, t]], dtype=complex)
    if convention == "real":
        return np.array([[t, s], [-s, t]], dtype=complex)
    raise ValueError(f"unknown splitter convention {convention!r}")


@dataclass(frozen=True)
class Stage:
    """One layer of elements. Elements within a stage act on disjoint rails."""

    elements: tuple[Element, ...]


@dataclass(frozen=True)
class PathState:
    """Photon amplitudes on each labelled path of one slice."""

    labels: tuple[str, ...]
    amplitudes: np.ndarray
    absorbed: float = 0.0

    def __getitem__(self, label: str) -> complex:
        try:
            return complex(self.amplitudes[self.labels.index(label)])
        except ValueError:
            raise KeyError(label) from None

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def as_dict(self) -> dict[str, complex]:
        return {lab: complex(a) for lab, a in zip(self.labels, self.amplitudes)}


@dataclass(frozen=True)
class OpticalNetwork:
    """Feed-forward sequence of stages over a fixed number of rails.

    Attributes
    ----------
    input_labels : tuple of str
        Path labels of slice 0.
    stages : tuple of Stage
    alignment : float
        Phase offset of the inner interferometer (0 is perfect destructive
        interference toward F). Recorded for reference; the actual phase
        lives in a ``Phase`` element.
    source : str
        Label of the input path the photon enters on.
    detector : str
        Label of the post-selected output port.
    """

    input_labels: tuple[str, ...]
    stages: tuple[Stage, ...]
    alignment: float = 0.0
    source: str = "IN"
    detector: str = "D"
    _slices: tuple[tuple[str, ...], ...] = field(init=False, repr=False, compare=False)
    _matrices: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(self.input_labels)
        if len(set(labels)) != len(labels):
            raise NetworkError(f"duplicate labels in input slice: {labels}")
        slices = [labels]
        mats = []
        for k, stage in enumerate(self.stages, start=1):
            labels, mat = _compile_stage(stage, labels, k)
            slices.append(labels)
            mats.append(mat)
        object.__setattr__(self, "_slices", tuple(slices))
        object.__setattr__(self, "_matrices", tuple(mats))
        if self.source not in slices[0]:
            raise NetworkError(f"source {self.source!r} is not an input path")
        if self.detector not in slices[-1]:
            raise NetworkError(f"detector {self.detector!r} is not an output port")

    @property
    def n_rails(self) -> int:
        return len(self.input_labels)

    @property
    def n_slices(self) -> int:
        return len(self._slices)

    def labels(self, slice_index: int) -> tuple[str, ...]:
        return self._slices[slice_index]

    def stage_matrix(self, k: int) -> np.ndarray:
        """Transfer matrix of stage ``k`` (1-based, maps slice k-1 to slice k)."""
        return self._matrices[k - 1]

    def rail(self, path: str, slice_index: int) -> int:
        try:
            return self._slices[slice_index].index(path)
        except ValueError:
            raise NetworkError(f"path {path!r} does not exist at slice {slice_index}") from None

    def locate(self, path: str) -> int:
        """First slice in which ``path`` appears."""
        for i, labels in enumerate(self._slices):
            if path in labels:
                return i
        raise NetworkError(f"unknown path {path!r}")

    def has_blocks(self) -> bool:
        return any(isinstance(e, Block) for s in self.stages for e in s.elements)

    def transfer(self, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        """Composed map from slice ``start`` to slice ``stop``."""
        stop = self.n_slices - 1 if stop is None else stop
        u = np.eye(self.n_rails, dtype=complex)
        for k in range(start + 1, stop + 1):
            u = self._matrices[k - 1] @ u
        return u

    def mirrors(self) -> list[tuple[int, Mirror]]:
        """(stage index, mirror) for every mirror element."""
        return [
            (k, e)
            for k, s in enumerate(self.stages, start=1)
            for e in s.elements
            if isinstance(e, Mirror)
        ]

    def source_state(self) -> PathState:
        amps = np.zeros(self.n_rails, dtype=complex)
        amps[self.rail(self.source, 0)] = 1.0
        return PathState(self.labels(0), amps)

    def port_state(self, port: Optional[str] = None) -> PathState:
        port = self.detector if port is None else port
        amps = np.zeros(self.n_rails, dtype=complex)
        amps[self.rail(port, self.n_slices - 1)] = 1.0
        return PathState(self.labels(-1), amps)


def _compile_stage(stage: Stage, labels: tuple[str, ...], k: int):
    n = len(labels)
    mat = np.eye(n, dtype=complex)
    out = list(labels)
    used: set[int] = set()

    def claim(path: str) -> int:
        if path not in labels:
            raise NetworkError(f"stage {k}: path {path!r} not present (have {labels})")
        i = labels.index(path)
        if i in used:
            raise NetworkError(f"stage {k}: path {path!r} used by two elements")
        used.add(i)
        return i

    for el in stage.elements:
        if isinstance(el, BeamSplitter):
            i, j = claim(el.inputs[0]), claim(el.inputs[1])
            bs = beam_splitter_matrix(el.reflectivity, el.convention)
            idx = np.array([i, j])
            mat[np.ix_(idx, idx)] = bs
            out[i], out[j] = el.outputs
        elif isinstance(el, Mirror):
            claim(el.label)
        elif isinstance(el, Phase):
            i = claim(el.path)
            mat[i, i] = np.exp(1j * el.phi)
        elif isinstance(el, Block):
            i = claim(el.path)
            mat[i, i] = 0.0
        elif isinstance(el, Detector):
            claim(el.port)
        else:
            raise NetworkError(f"stage {k}: unknown element {el!r}")
    if len(set(out)) != len(out):
        raise NetworkError(f"stage {k}: duplicate output labels {out}")
    return tuple(out), mat


def build_network(
    outer: float = OUTER_REFLECTIVITY,
    inner: float = INNER_REFLECTIVITY,
    eta: float = 0.0,
    blocks: Iterable[str] = (),
    vibrations: Optional[Mapping[str, VibrationSpec]] = None,
    outer_phase: float = OUTER_PHASE,
) -> OpticalNetwork:
    """The nested interferometer.

    Rails, by slice (before any blocks are inserted)::

        0  IN  V1    V2      source and two vacuum inputs
        1  E   C     V2      outer splitter
        2  E   C     V2      mirrors E, C
        3  A   C     B       inner splitter
        4  A   C     B       mirrors A, B
        5  A   C     B       alignment phase on B
        6  F   C     G       inner recombiner (G leaves the apparatus)
        7  F   C     G       mirror F, outer lock phase on C
        8  D   DARK  G       outer recombiner
        9  D   DARK  G       detector on D

    ``outer`` is the power each outer splitter sends toward C and ``inner``
    the reflectivity of both inner splitters.
    """
    vib = dict(vibrations or {})
    unknown = set(vib) - set(MIRRORS)
    if unknown:
        raise NetworkError(f"no mirror at {sorted(unknown)}")

    def m(label):
        return Mirror(label, vib.get(label))

    stages = (
        Stage((BeamSplitter(("IN", "V1"), ("E", "C"), outer),)),
        Stage((m("E"), m("C"))),
        Stage((BeamSplitter(("E", "V2"), ("A", "B"), inner),)),
        Stage((m("A"), m("B"))),
        Stage((Phase("B", eta),)),
        Stage((BeamSplitter(("A", "B"), ("F", "G"), inner),)),
        Stage((m("F"), Phase("C", outer_phase))),
        Stage((BeamSplitter(("F", "C"), ("D", "DARK"), outer),)),
        Stage((Detector("D"),)),
    )
    net = OpticalNetwork(("IN", "V1", "V2"), stages, alignment=eta)
    for path in blocks:
        net = apply_block(net, path)
    return net


MIRRORS = ("A", "B", "C", "E", "F")


def apply_block(network: OpticalNetwork, path: str) -> OpticalNetwork:
    """Copy of ``network`` with a beam block right where ``path`` first appears."""
    k = network.locate(path)
    stages = list(network.stages)
    stages.insert(k, Stage((Block(path),)))
    return replace(network, stages=tuple(stages))


def propagate_forward(network: OpticalNetwork, state: Optional[PathState] = None) -> list[PathState]:
    """Forward-evolve ``state`` (default: photon on the source path).

    Returns one ``PathState`` per slice. Amplitude removed by blocks is
    accumulated in ``absorbed``.
    """
    if state is None:
        state = network.source_state()
    if tuple(state.labels) != network.labels(0):
        raise NetworkError("input state labels do not match the network input slice")
    out = [state]
    amps = np.asarray(state.amplitudes, dtype=complex)
    absorbed = state.absorbed
    for k in range(1, network.n_slices):
        new = network.stage_matrix(k) @ amps
        absorbed += float(np.vdot(amps, amps).real - np.vdot(new, new).real)
        amps = new
        out.append(PathState(network.labels(k), amps, absorbed))
    return out
