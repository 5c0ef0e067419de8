import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from permadde import (BoundsReport, TimeFunction, bounds_report, build_envelopes,
                      check_condition, check_hypotheses, closed_form_bounds,
                      equilibrium_bounds, infer_family, positive_root, preset)
from permadde.bounds import sampled_tail_range
from permadde.errors import (EnvelopeUnavailable, FamilyMismatch, NoSignChange,
                             UnsupportedFamily)
from permadde.model import eval_rhs

TF = TimeFunction


# --- families ---------------------------------------------------------------

def test_family_inference(quadratic_sin, bh_constant, nicholson_sin):
    assert infer_family(quadratic_sin) == "quadratic"
    assert infer_family(bh_constant) == "beverton-holt"
    assert infer_family(nicholson_sin) == "nicholson"


def test_bh_with_zero_beta_and_mu_is_quadratic():
    m = preset("bh-logistic", {"alpha": 2.0, "beta": 0.0, "mu": 0.0})
    assert infer_family(m) == "quadratic"


def test_mixed_kinds_are_general():
    m = preset("bh-logistic", {"alpha": 2.0, "beta": 1.0})
    r = preset("nicholson", {"d": 1.0, "beta": 2.0})
    from permadde import ModelSpec
    mixed = ModelSpec(m.recruitment + r.recruitment, m.mortality, 1.0)
    assert infer_family(mixed) == "general"


def test_illegal_coercion(nicholson_sin):
    with pytest.raises(FamilyMismatch):
        closed_form_bounds(nicholson_sin, "quadratic")


def test_general_has_no_closed_form(quadratic_sin):
    with pytest.raises(UnsupportedFamily):
        closed_form_bounds(quadratic_sin, "general")


def test_condition_not_applicable(quadratic_sin):
    with pytest.raises(FamilyMismatch):
        check_condition(quadratic_sin, "birth-exceeds-death")


# --- hypotheses -------------------------------------------------------------

def test_nicholson_margins(nicholson_sin):
    assert check_condition(nicholson_sin, "birth-exceeds-death").margin == \
        pytest.approx(0.5, abs=1e-12)
    assert check_condition(nicholson_sin, "birth-below-e-death").margin == \
        pytest.approx(math.e - 2.5, abs=1e-12)


def test_bh_birth_exceeds_mortality_fails():
    m = preset("bh-logistic", {"alpha": 1.0, "beta": 1.0, "mu": 2.0})
    v = check_condition(m, "birth-exceeds-mortality")
    assert not v.passed and v.margin == -1.0


def test_hypothesis_list_order(bh_constant):
    names = [h.name for h in check_hypotheses(bh_constant)]
    assert names == ["coefficients-bounded", "birth-exceeds-mortality", "rho-bounded-away",
                     "envelope-monotone", "envelope-roots"]


# --- roots ------------------------------------------------------------------

def test_positive_root_exact():
    assert positive_root(lambda x: 3.0 - x) == 3.0


def test_positive_root_large():
    r = positive_root(lambda x: 1e6 - x)
    assert r == pytest.approx(1e6, rel=1e-15)


def test_positive_root_no_sign_change():
    with pytest.raises(NoSignChange):
        positive_root(lambda x: 1.0)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0.1, 10.0), b=st.floats(0.0, 5.0), mu=st.floats(0.0, 0.09),
       kappa=st.floats(0.1, 5.0))
def test_positive_root_is_a_zero(a, b, mu, kappa):
    m = preset("bh-logistic", {"alpha": a, "beta": b, "mu": mu, "kappa": kappa})
    k_l, k_u = equilibrium_bounds(build_envelopes(m))
    assert k_l == k_u
    # the root is a zero of the right-hand side at the constant state
    assert abs(eval_rhs(m, 0.0, k_l, [k_l])) < 1e-10 * max(1.0, a * k_l)


# --- envelopes --------------------------------------------------------------

def test_envelopes_are_constant(bh_sin):
    env = build_envelopes(bh_sin)
    for side in (env.lower, env.upper):
        assert all(f.is_constant for _, f in side.coefficient_functions())
        assert side.cooperative


def test_envelopes_need_damping():
    m = preset("bh-logistic", {"alpha": 2.0, "kappa": TF.sinusoid(1, 1, 1, 0)})
    with pytest.raises(EnvelopeUnavailable):
        build_envelopes(m)


def test_ricker_envelope_unavailable_above_one():
    with pytest.raises(EnvelopeUnavailable):
        build_envelopes(preset("nicholson", {"d": 1.0, "beta": 4.0}))


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 200), x=st.floats(0, 10), y=st.floats(0, 10))
def test_envelope_rhs_ordering(t, x, y):
    model = preset("bh-logistic", {"alpha": TF.sinusoid(2, 0.5, 1.3, 0.2),
                                   "beta": TF.sinusoid(0.5, 0.2, 0.4, 0),
                                   "mu": TF.sinusoid(0.2, 0.1, 2.0, 1.0),
                                   "kappa": TF.sinusoid(1.0, 0.5, 0.9, 0)})
    env = build_envelopes(model)
    f = eval_rhs(model, t, x, [y])
    assert eval_rhs(env.lower, t, x, [y]) <= f + 1e-12
    assert f <= eval_rhs(env.upper, t, x, [y]) + 1e-12


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 200), x=st.floats(0, 5), y=st.floats(0, 1))
def test_ricker_envelope_ordering_on_unit_interval(t, x, y):
    model = preset("nicholson", {"d": 1.0, "beta": TF.sinusoid(2, 0.5, 1, 0)})
    env = build_envelopes(model)
    f = eval_rhs(model, t, x, [y])
    assert eval_rhs(env.lower, t, x, [y]) <= f + 1e-12
    assert f <= eval_rhs(env.upper, t, x, [y]) + 1e-12


# --- closed forms -----------------------------------------------------------

def test_tail_range_sinusoid():
    f = TF.sinusoid(2, 1, 1, 0)
    lo, hi = sampled_tail_range(f, [f])
    assert lo == pytest.approx(1.0, abs=1e-12)
    assert hi == pytest.approx(3.0, abs=1e-12)


def test_tail_range_piecewise_uses_limit():
    f = TF.piecewise_linear([(0, 5), (150, 2)])
    assert sampled_tail_range(f, [f]) == (2.0, 2.0)


def test_quadratic_bounds(quadratic_sin):
    m0, M0 = closed_form_bounds(quadratic_sin)
    assert m0 == pytest.approx(1.0, abs=1e-6)
    assert M0 == pytest.approx(3.0, abs=1e-6)


def test_bh_constant_bounds(bh_constant):
    m0, M0 = closed_form_bounds(bh_constant)
    assert m0 == 2.0 / 3.0
    assert M0 == 2.0


def test_nicholson_bounds(nicholson_sin):
    m0, M0 = closed_form_bounds(nicholson_sin)
    assert m0 == pytest.approx(math.log(1.5), abs=1e-6)
    assert M0 == pytest.approx(math.log(2.5), abs=1e-6)


# --- report -----------------------------------------------------------------

def test_report_quadratic(quadratic_sin):
    rep = bounds_report(quadratic_sin)
    assert rep.permanent and rep.all_pass
    assert rep.K_l == pytest.approx(1.0, abs=1e-10)
    assert rep.K_u == pytest.approx(3.0, abs=1e-10)
    lo, hi = rep.certified
    assert lo == pytest.approx(1.0, abs=1e-6) and hi == pytest.approx(3.0, abs=1e-6)


def test_report_extinction():
    rep = bounds_report(preset("bh-logistic", {"alpha": 1.0, "beta": 1.0, "mu": 2.0}))
    assert not rep.permanent
    assert rep.K_l == 0.0 and rep.K_u == 0.0
    assert rep.m0 is None


def test_report_rho_not_bounded_away():
    m = preset("bastinec-constant", {"alpha": 1.0, "beta": 1.0,
                                     "r": TF.sinusoid(1, 1, 1, 0)})
    rep = bounds_report(m)
    assert not rep.verdict("rho-bounded-away").passed
    assert not rep.permanent


def test_report_dict_round_trip(nicholson_sin):
    rep = bounds_report(nicholson_sin)
    back = BoundsReport.from_dict(rep.to_dict())
    assert back.to_dict() == rep.to_dict()
    assert rep.warnings


def test_report_coerced_family(quadratic_sin):
    assert bounds_report(quadratic_sin, "beverton-holt").family == "beverton-holt"


@settings(max_examples=30, deadline=None)
@given(a0=st.floats(0.5, 3.0), a1=st.floats(0.0, 0.4), w=st.floats(0.2, 3.0),
       k=st.floats(0.5, 2.0))
def test_certified_interval_inside_envelope_roots(a0, a1, w, k):
    m = preset("bastinec-quadratic", {"alpha": TF.sinusoid(a0, a1 * a0, w, 0.0), "beta": k})
    rep = bounds_report(m)
    lo, hi = rep.certified
    assert rep.permanent
    assert rep.K_l - 1e-9 <= lo <= hi <= rep.K_u + 1e-9
    assert np.isfinite(hi)
