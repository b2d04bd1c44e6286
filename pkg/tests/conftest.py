import cmath
import math

import numpy as np
import pytest

from nested_mzi.config import DEFAULT_FREQUENCIES, ScenarioConfig
from nested_mzi.network import MIRRORS, VibrationSpec, build_network


def path_sum(outer=1 / 3, inner=0.5, eta=0.0, block_c=False):
    """Hand-written sum over paths for the nested interferometer.

    Returns forward amplitudes psi, backward amplitudes beta = <D|U_later|p>
    and the detector amplitude, for paths A, B, C, E, F.
    """
    to, ro = math.sqrt(1 - outer), math.sqrt(outer)
    ti, ri = math.sqrt(1 - inner), math.sqrt(inner)
    ph = cmath.exp(1j * eta)
    psi = {"E": to, "C": 0 if block_c else 1j * ro}
    psi["A"] = psi["E"] * ti
    psi["B"] = psi["E"] * 1j * ri
    psi["F"] = psi["A"] * ti + psi["B"] * ph * 1j * ri
    beta = {"F": to, "C": 0 if block_c else -1j * ro}
    beta["A"] = beta["F"] * ti
    beta["B"] = beta["F"] * 1j * ri * ph
    beta["E"] = beta["A"] * ti + beta["B"] * 1j * ri
    d = sum(beta[p] * psi[p] for p in ("F", "C"))
    return psi, beta, d


def mirror_vibrations(amplitude=0.005, mirrors=MIRRORS, phase=0.0):
    return {m: VibrationSpec(DEFAULT_FREQUENCIES[m], amplitude, phase) for m in mirrors}


@pytest.fixture(scope="session")
def default_network():
    return build_network()


@pytest.fixture(scope="session")
def fig2b_config():
    return ScenarioConfig(name="fig2b", vibrations=mirror_vibrations())


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
