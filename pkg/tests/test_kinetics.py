from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urbancrime.errors import NotFound
from urbancrime.kinetics import (
    KineticsPack,
    ModelParams,
    Variant,
    builtin_kinetics,
    builtin_names,
    default_validation_range,
    homogeneous_state,
    reaction_residual,
    validate_kinetics,
)


def test_paper_default_values(kin):
    assert kin.eta(3.0) == pytest.approx(1 - math.exp(-3), abs=1e-15)
    assert kin.eta(3.0) == pytest.approx(0.950213, abs=1e-6)
    assert kin.f1(3.0) == pytest.approx(0.25)
    assert kin.f(3.0) == pytest.approx(math.log(4.0))


def test_constant_pack(kin_const):
    for A in (0.1, 1.0, 7.5):
        assert kin_const.eta(A) == 1.0
        assert kin_const.eta1(A) == 0.0
        assert kin_const.f(A) == A
    arr = np.linspace(0.5, 2, 5)
    assert kin_const.eta1(arr).shape == arr.shape


def test_unknown_pack_raises():
    with pytest.raises(NotFound):
        builtin_kinetics("nope")
    assert set(builtin_names()) == {"paper-default", "constant-eta-linear-f"}


@pytest.mark.parametrize("A0,B,expected", [(1, 2, (3, 2 / 3)), (1, 3, (4, 0.75)), (0.967, 13.09, (14.057, 13.09 / 14.057))])
def test_homogeneous_state(A0, B, expected):
    Abar, rhobar = homogeneous_state(ModelParams(A0, B, 0.1, 0.01))
    assert Abar == pytest.approx(expected[0], rel=1e-14)
    assert rhobar == pytest.approx(expected[1], rel=1e-14)


def test_fig6b_rhobar_digits():
    _, rhobar = homogeneous_state(ModelParams(0.967, 13.09, 0.1, 0.03))
    assert f"{rhobar:.5f}" == "0.93121"


@settings(max_examples=200, deadline=None)
@given(
    A0=st.floats(1e-3, 1e3),
    B=st.floats(1e-3, 1e3),
    lam=st.floats(1e-3, 1.0),
)
def test_homogeneous_state_is_fixed_point(A0, B, lam):
    p = ModelParams(A0, B, lam, 0.01)
    Abar, rhobar = homogeneous_state(p)
    rA, rr = reaction_residual(p, Abar, rhobar)
    assert abs(rA) <= 4e-16 * Abar * 4
    assert abs(rr) <= 4e-16 * lam * B * 4
    assert 0 < rhobar < 1


@pytest.mark.parametrize("bad", [dict(A0=0), dict(Bbar=-1), dict(lambda0=0), dict(lambda0=1.5), dict(eps=0)])
def test_params_validation(bad):
    vals = dict(A0=1.0, Bbar=2.0, lambda0=0.1, eps=0.01)
    vals.update(bad)
    with pytest.raises(ValueError):
        ModelParams(**vals)


def test_variant_parsing():
    assert Variant.parse("12") is Variant.DEPARTURE
    assert Variant.parse("Arrival") is Variant.ARRIVAL
    p = ModelParams(1, 2, 0.1, 0.01, "arrival")
    assert p.variant is Variant.ARRIVAL
    assert p.with_variant("departure").variant is Variant.DEPARTURE
    assert p.with_eps(0.5).eps == 0.5


def test_validate_paper_default(kin):
    rep = validate_kinetics(kin, (0.1, 20.0), 100)
    assert rep.passed, rep.failed()
    assert rep.informational["f_le_A"].passed


def test_validate_builtins_default_range():
    p = ModelParams(1, 2, 0.1, 0.01)
    for name in builtin_names():
        rep = validate_kinetics(builtin_kinetics(name), default_validation_range(p))
        assert rep.checks["derivative_consistency"].passed, name


def _pack(**over):
    base = builtin_kinetics("paper-default")
    fields = {k: getattr(base, k) for k in ("eta", "eta1", "eta2", "eta3", "f", "f1", "f2", "f3")}
    fields.update(over)
    return KineticsPack(name="custom", **fields)


def test_validate_detects_eta_condition():
    pack = _pack(eta=lambda A: A**2, eta1=lambda A: 2 * A, eta2=lambda A: 2 + 0 * A, eta3=lambda A: 0 * A)
    rep = validate_kinetics(pack, (2.0, 3.0), 50)
    assert not rep.checks["eta_ge_eta1_A"].passed
    assert rep.checks["eta_ge_eta1_A"].first_violation == pytest.approx(2.0)


def test_validate_detects_derivative_mismatch():
    rep = validate_kinetics(_pack(f1=lambda A: 0 * A), (0.1, 5.0), 50)
    assert not rep.checks["derivative_consistency"].passed
    assert "derivative_consistency" in rep.failed()


def test_validate_rejects_bad_range(kin):
    with pytest.raises(ValueError):
        validate_kinetics(kin, (0.0, 1.0))
    with pytest.raises(ValueError):
        validate_kinetics(kin, (1.0, 2.0), samples=1)


def test_log_f_derivatives_match_finite_differences(kin):
    A, h = 3.0, 1e-4
    g = lambda x: math.log(kin.f(x))  # noqa: E731
    g1, g2, g3 = kin.log_f_derivatives(A)
    assert g1 == pytest.approx((g(A + h) - g(A - h)) / (2 * h), rel=1e-7)
    assert g2 == pytest.approx((g(A + h) - 2 * g(A) + g(A - h)) / h**2, rel=1e-5)
    h3 = 1e-3  # larger step: the third difference loses digits as h^-3
    fd3 = (g(A + 2 * h3) - 2 * g(A + h3) + 2 * g(A - h3) - g(A - 2 * h3)) / (2 * h3**3)
    assert g3 == pytest.approx(fd3, rel=1e-4)
