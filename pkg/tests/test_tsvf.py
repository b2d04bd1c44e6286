import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nested_mzi.network import OpticalNetwork, build_network
from nested_mzi.tsvf import (
    P,
    Projector,
    SingularPostselection,
    backward_state,
    overlap,
    require_value,
    two_state_vector,
    weak_value,
)
from nested_mzi.network import NetworkError

from conftest import path_sum


@pytest.mark.parametrize("path,expected", [("A", 1), ("B", -1), ("C", 1), ("E", 0), ("F", 0)])
def test_weak_values_default(default_network, path, expected):
    rep = weak_value(default_network, P(path))
    assert not rep.singular
    assert abs(rep.value - expected) < 1e-12


@pytest.mark.parametrize("outer,inner,eta", [(1 / 3, 0.5, 0.0), (0.25, 0.3, 0.2), (0.5, 0.5, 1.0)])
def test_weak_values_match_path_sum(outer, inner, eta):
    net = build_network(outer, inner, eta)
    psi, beta, d = path_sum(outer, inner, eta)
    for p in "ABCEF":
        assert weak_value(net, P(p)).value == pytest.approx(beta[p] * psi[p] / d, abs=1e-12)


def test_product_vanishes(default_network):
    assert weak_value(default_network, P("A") * P("B")).value == 0


def test_sum_vanishes(default_network):
    assert abs(weak_value(default_network, P("A") + P("B")).value) < 1e-12


def test_product_rule_violation(default_network):
    a = weak_value(default_network, P("A")).value
    b = weak_value(default_network, P("B")).value
    assert abs(a * b + 1) < 1e-12
    assert weak_value(default_network, P("A") * P("B")).value == 0


def test_backward_identity_network():
    net = OpticalNetwork(("IN", "X"), (), detector="X")
    (b,) = backward_state(net, "X")
    assert b["X"] == 1 and b["IN"] == 0


def test_backward_dark_at_e(default_network):
    b = backward_state(default_network)
    _, beta, _ = path_sum()
    assert abs(b[default_network.locate("E")]["E"]) < 1e-12
    assert abs(beta["E"]) < 1e-15


def test_backward_bright_at_f_forward_dark(default_network):
    s = default_network.locate("F")
    tsv = two_state_vector(default_network, s)
    assert abs(tsv.forward["F"]) < 1e-15
    assert abs(tsv.backward["F"]) ** 2 == pytest.approx(2 / 3, abs=1e-12)


def test_overlap_default(default_network):
    ov = overlap(two_state_vector(default_network, 3))
    assert abs(ov) ** 2 == pytest.approx(1 / 9, abs=1e-12)
    psi, beta, _ = path_sum()
    assert ov == pytest.approx(beta["C"] * psi["C"], abs=1e-12)


def test_overlap_slice_independent(default_network):
    ovs = [overlap(two_state_vector(default_network, s)) for s in range(default_network.n_slices)]
    np.testing.assert_allclose(ovs, ovs[0], atol=1e-12)


def test_overlap_blocked_c_zero():
    net = build_network(blocks=["C"])
    assert overlap(two_state_vector(net, -1)) == 0
    rep = weak_value(net, P("A"))
    assert rep.singular and rep.value is None
    with pytest.raises(SingularPostselection):
        require_value(rep)


def test_overlap_identity_network():
    net = OpticalNetwork(("IN",), (), detector="IN")
    assert overlap(two_state_vector(net, 0)) == 1


def test_completeness(default_network):
    net = default_network
    for s in range(net.n_slices):
        total = sum((P(p, s) for p in net.labels(s)), start=0)
        assert abs(weak_value(net, total).value - 1) < 1e-12


def test_cross_slice_product_rejected(default_network):
    with pytest.raises(NetworkError):
        weak_value(default_network, P("A") * P("C", 1))


def test_explicit_projector_and_string(default_network):
    assert weak_value(default_network, Projector("A")).value == weak_value(default_network, "A").value


@settings(max_examples=100, deadline=None)
@given(
    outer=st.floats(0.05, 0.95),
    inner=st.floats(0.05, 0.95),
    eta=st.floats(-3, 3),
    x=st.sampled_from("ABC"),
    y=st.sampled_from("ABC"),
)
def test_sum_rule(outer, inner, eta, x, y):
    net = build_network(outer, inner, eta)
    s = net.locate("A")
    wx, wy, wxy = (weak_value(net, e) for e in (P(x, s), P(y, s), P(x, s) + P(y, s)))
    if wx.singular:
        return
    assert abs(wxy.value - (wx.value + wy.value)) < 1e-12 * max(1, abs(wx.value) + abs(wy.value))
