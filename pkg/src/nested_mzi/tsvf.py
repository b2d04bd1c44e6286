"""Forward/backward states and weak values of path projectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .network import NetworkError, OpticalNetwork, PathState, propagate_forward

# |<phi|psi>| below this (relative to the norms of both states) counts as singular
SINGULAR_THRESHOLD = 1e-10


class SingularPostselection(ArithmeticError):
    """The post-selected state is (numerically) orthogonal to the forward state."""


@dataclass(frozen=True)
class TwoStateVector:
    slice: int
    forward: PathState
    backward: PathState

    def overlap(self) -> complex:
        return overlap(self)


@dataclass(frozen=True)
class Projector:
    path: str
    slice: Optional[int] = None


@dataclass(frozen=True)
class ProjectorExpr:
    """Sum of products of path projectors, with complex coefficients.

    ``terms`` is a tuple of ``(coefficient, factors)`` pairs; every factor
    of one product must sit on the same slice.
    """

    terms: tuple[tuple[complex, tuple[Projector, ...]], ...]

    @classmethod
    def of(cls, path: str, slice: Optional[int] = None) -> "ProjectorExpr":
        return cls(((1.0, (Projector(path, slice),)),))

    def __add__(self, other: "ProjectorExpr") -> "ProjectorExpr":
        return ProjectorExpr(self.terms + _expr(other).terms)

    def __radd__(self, other):
        if other == 0:
            return self
        return _expr(other) + self

    def __mul__(self, other) -> "ProjectorExpr":
        if isinstance(other, (int, float, complex)):
            return ProjectorExpr(tuple((c * other, f) for c, f in self.terms))
        other = _expr(other)
        return ProjectorExpr(
            tuple((c1 * c2, f1 + f2) for c1, f1 in self.terms for c2, f2 in other.terms)
        )

    def __rmul__(self, other):
        return self * other

    def __neg__(self):
        return self * -1


def _expr(x) -> ProjectorExpr:
    if isinstance(x, ProjectorExpr):
        return x
    if isinstance(x, Projector):
        return ProjectorExpr(((1.0, (x,)),))
    if isinstance(x, str):
        return ProjectorExpr.of(x)
    raise TypeError(f"cannot build a projector expression from {x!r}")


def P(path: str, slice: Optional[int] = None) -> ProjectorExpr:
    """Projector on ``path``; slice defaults to where the path first appears."""
    return ProjectorExpr.of(path, slice)


@dataclass(frozen=True)
class WeakValueReport:
    value: Optional[complex]
    overlap: complex
    singular: bool


def backward_state(network: OpticalNetwork, postselect_port: Optional[str] = None) -> list[PathState]:
    """Backward-evolve the unit state on ``postselect_port`` through the adjoint maps.

    Element ``k`` of the result lives on slice ``k``; its amplitudes are the
    ket ``U_{k->end}^dagger |port>``.
    """
    end = network.port_state(postselect_port)
    amps = end.amplitudes
    out = [end]
    for k in range(network.n_slices - 1, 0, -1):
        amps = network.stage_matrix(k).conj().T @ amps
        out.append(PathState(network.labels(k - 1), amps))
    return out[::-1]


def two_state_vector(
    network: OpticalNetwork, slice: int, postselect_port: Optional[str] = None
) -> TwoStateVector:
    fwd = propagate_forward(network)[slice]
    bwd = backward_state(network, postselect_port)[slice]
    return TwoStateVector(slice % network.n_slices, fwd, bwd)


def overlap(tsv: TwoStateVector) -> complex:
    """<phi|psi> on the slice of ``tsv``."""
    return complex(np.vdot(tsv.backward.amplitudes, tsv.forward.amplitudes))


def _is_singular(ov: complex, tsv: TwoStateVector) -> bool:
    scale = np.sqrt(tsv.forward.norm2 * tsv.backward.norm2)
    return abs(ov) < SINGULAR_THRESHOLD * scale or scale == 0.0


def _product_slice(network: OpticalNetwork, factors: Sequence[Projector]) -> int:
    slices = {network.locate(p.path) if p.slice is None else p.slice for p in factors}
    if len(slices) != 1:
        raise NetworkError(f"projector product spans several slices: {sorted(slices)}")
    (s,) = slices
    return s


def weak_value(
    network: OpticalNetwork,
    expr: Union[ProjectorExpr, Projector, str],
    postselect_port: Optional[str] = None,
) -> WeakValueReport:
    """Weak value ``<phi|expr|psi> / <phi|psi>``.

    Each product of projectors is evaluated on its own slice. The overlap
    is ``<port|U|source>`` and does not depend on the slice.
    """
    expr = _expr(expr)
    fwd = propagate_forward(network)
    bwd = backward_state(network, postselect_port)
    last = TwoStateVector(network.n_slices - 1, fwd[-1], bwd[-1])
    ov = overlap(last)
    numerator = 0j
    for coeff, factors in expr.terms:
        s = _product_slice(network, factors)
        mask = np.ones(network.n_rails)
        for p in factors:
            sel = np.zeros(network.n_rails)
            sel[network.rail(p.path, s)] = 1.0
            mask = mask * sel
        numerator += coeff * np.vdot(bwd[s].amplitudes, mask * fwd[s].amplitudes)
    singular = bool(_is_singular(ov, last))
    value = None if singular else complex(numerator / ov)
    return WeakValueReport(value, ov, singular)


def weak_values(
    network: OpticalNetwork, paths: Iterable[str], postselect_port: Optional[str] = None
) -> dict[str, WeakValueReport]:
    return {p: weak_value(network, P(p), postselect_port) for p in paths}


def require_value(report: WeakValueReport) -> complex:
    if report.singular:
        raise SingularPostselection(
            f"post-selection overlap {abs(report.overlap):.3e} is below the singular threshold"
        )
    return report.value
