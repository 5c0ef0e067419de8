import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from permadde import (DelayTerm, HistorySpec, ModelSpec, MortalityTerm,
                      RecruitmentTerm, TimeFunction, admissible, eval_rhs, preset,
                      validate_model)
from permadde.errors import ArityMismatch, BadParams, UnknownPreset
from permadde.model import recruitment_value

TF = TimeFunction


# --- time functions ---------------------------------------------------------

def test_constant_value():
    assert TF.constant(2)(17) == 2


def test_sinusoid_peak():
    assert TF.sinusoid(2, 1, 1, 0)(math.pi / 2) == pytest.approx(3.0, abs=1e-15)


def test_piecewise_midpoint():
    assert TF.piecewise_linear([(0, 1), (1, 3)])(0.5) == 2.0


def test_piecewise_extends_constantly():
    f = TF.piecewise_linear([(0, 1), (1, 3)])
    assert f(50.0) == 3.0
    assert (f.inf, f.sup, f.tail_liminf, f.tail_limsup) == (1.0, 3.0, 3.0, 3.0)


def test_constant_metadata_all_equal():
    f = TF.constant(0.7)
    assert f.inf == f.sup == f.tail_liminf == f.tail_limsup == 0.7


def test_vectorised_matches_scalar():
    f = TF.sinusoid(1.5, 0.5, 2.0, 0.3)
    ts = np.linspace(0, 10, 11)
    assert np.array_equal(f(ts), np.array([f(t) for t in ts]))


# --- right-hand side --------------------------------------------------------

def test_rhs_bastinec_equilibrium():
    m = preset("bastinec-constant", {"m": 1, "alpha": 1.0, "beta": 1.0})
    assert eval_rhs(m, 0.0, 1.0, [1.0]) == 0.0


def test_rhs_nicholson_equilibrium(nicholson_e):
    assert eval_rhs(nicholson_e, 0.0, 1.0, [1.0]) == pytest.approx(0.0, abs=1e-15)


def test_rhs_bh_equilibrium(bh_constant):
    assert eval_rhs(bh_constant, 0.0, 1.0, [1.0]) == 0.0


def test_rhs_arity(bh_constant):
    with pytest.raises(ArityMismatch):
        eval_rhs(bh_constant, 0.0, 1.0, [1.0, 2.0])


def test_rhs_applies_rho():
    base = preset("bastinec-constant", {"alpha": [1.0, 2.0], "beta": 1.5})
    scaled = preset("bastinec-constant", {"alpha": [1.0, 2.0], "beta": 1.5, "r": 3.0})
    assert eval_rhs(scaled, 0.4, 0.7, [0.2, 0.9]) == pytest.approx(
        3.0 * eval_rhs(base, 0.4, 0.7, [0.2, 0.9]))


# --- validation -------------------------------------------------------------

def test_valid_bh_preset(bh_constant):
    assert validate_model(bh_constant) == []


def test_kappa_not_bounded_away():
    m = preset("bh-logistic", {"alpha": 2.0, "kappa": TF.sinusoid(1, 1, 1, 0)})
    assert [v.code for v in validate_model(m)] == ["KappaNotBoundedAway"]


def test_declared_sup_too_small():
    alpha = TF.sinusoid(2, 1, 1, 0, sup=2.5, tail_limsup=2.5)
    m = preset("bastinec-quadratic", {"alpha": alpha, "beta": 1.0})
    codes = [v.code for v in validate_model(m)]
    assert "SampledValueExceedsDeclaredSup" in codes


def test_weights_not_normalised():
    delay = DelayTerm.mixture([0.5, 1.0], [0.5, 0.6])
    m = ModelSpec([RecruitmentTerm("linear", TF.constant(1.0), delay)],
                  MortalityTerm(TF.constant(0.0), TF.constant(1.0)), 1.0)
    assert [v.code for v in validate_model(m)] == ["WeightsNotNormalized"]


def test_lag_beyond_tau_max():
    m = preset("bh-logistic", {"alpha": 2.0, "tau": 2.0, "tau_max": 1.0})
    assert "LagExceedsTauMax" in [v.code for v in validate_model(m)]


def test_nicholson_passes_validation(nicholson_sin):
    assert validate_model(nicholson_sin) == []


def test_inconsistent_metadata():
    bad = TF("sinusoid", (2.0, 1.0, 1.0, 0.0), 1.0, 3.0, 2.5, 2.0)
    m = preset("bastinec-quadratic", {"alpha": bad, "beta": 1.0})
    assert "InconsistentMetadata" in [v.code for v in validate_model(m)]


def test_check_horizon_env(monkeypatch):
    from permadde.model import check_horizon_default
    monkeypatch.setenv("PERMADDE_CHECK_HORIZON", "42.5")
    assert check_horizon_default() == 42.5


# --- histories --------------------------------------------------------------

def test_admissible_constant():
    assert admissible(HistorySpec.constant(0.5), 1.0)


def test_zero_history_not_admissible():
    assert not admissible(HistorySpec.constant(0.0), 1.0)


def test_zero_away_from_origin_is_admissible():
    assert admissible(HistorySpec.tabulated([(-1.0, 0.0), (0.0, 1.0)]), 1.0)


def test_negative_history_not_admissible():
    assert not admissible(HistorySpec.sinusoid(0.5, 1.0, 3.0, 0.0), 1.0)


# --- presets ----------------------------------------------------------------

def test_arino_zero_delay():
    m = preset("arino", {"gamma": 2.0, "mu": 1.0, "kappa": 1.0, "tau": 0.0})
    (term,) = m.recruitment
    assert term.kind == "beverton-holt"
    assert term.alpha.params == (2.0,)
    assert term.beta.params == (0.0,)
    assert m.mortality.mu.params == (1.0,) and m.mortality.kappa.params == (1.0,)


def test_arino_matches_original_form():
    # the original recruitment gamma*mu*y / (mu e^{mu tau} + k (e^{mu tau} - 1) y)
    g, mu, k, tau = 2.5, 0.7, 1.3, 0.8
    m = preset("arino", {"gamma": g, "mu": mu, "kappa": k, "tau": tau})
    for y in (0.1, 1.0, 4.0):
        original = g * mu * y / (mu * math.exp(mu * tau) + k * (math.exp(mu * tau) - 1) * y)
        assert m.recruitment[0].value(0.0, y) == pytest.approx(original, rel=1e-14)


def test_arino_needs_nonzero_mu():
    with pytest.raises(BadParams):
        preset("arino", {"gamma": 2.0, "mu": 0.0, "kappa": 1.0, "tau": 1.0})


def test_bastinec_constant_equilibrium():
    m = preset("bastinec-constant", {"m": 2, "alpha": [1.0, 2.0], "beta": 1.5,
                                     "tau": [TF.sinusoid(0.5, 0.3, 1, 0), 1.0]})
    k_star = sum(t.alpha.params[0] for t in m.recruitment) / m.mortality.kappa.params[0]
    assert k_star == 2.0
    assert eval_rhs(m, 3.0, 2.0, [2.0, 2.0]) == 0.0


def test_nicholson_autonomous_structure():
    m = preset("nicholson-autonomous", {"d": 1.0, "beta": [math.e]})
    (term,) = m.recruitment
    assert term.kind == "ricker"
    assert m.mortality.mu.params == (1.0,) and m.mortality.kappa.is_zero


def test_unknown_preset():
    with pytest.raises(UnknownPreset):
        preset("logistic", {})


def test_preset_rejects_unknown_param():
    with pytest.raises(BadParams):
        preset("nicholson", {"d": 1.0, "beta": 2.0, "gamma": 1.0})


def test_m_mismatch():
    with pytest.raises(BadParams):
        preset("bastinec-constant", {"m": 3, "alpha": [1.0, 2.0], "beta": 1.0})


# --- properties -------------------------------------------------------------

@pytest.mark.parametrize("kind", ["linear", "beverton-holt", "capped-ricker"])
def test_monotone_kinds_nondecreasing(kind):
    ys = np.concatenate([[0.0], np.geomspace(1e-6, 1e3, 400)])
    for t in np.linspace(0, 20, 9):
        a = 2.0 + math.sin(t)
        b = 0.5 + 0.4 * math.cos(t) if kind == "beverton-holt" else 0.0
        vals = recruitment_value(kind, a, b, ys)
        assert np.all(np.diff(vals) >= 0.0)


def test_ricker_is_not_monotone():
    assert not RecruitmentTerm("ricker", TF.constant(1.0), DelayTerm.point(1.0)).monotone


_models = [
    preset("bastinec-quadratic", {"alpha": [TF.sinusoid(2, 1, 1, 0), 0.5], "beta": 1.0}),
    preset("bh-logistic", {"alpha": TF.sinusoid(2, 0.5, 1.3, 0.2), "beta": 0.5, "mu": 0.2,
                           "kappa": 1.0}),
    preset("nicholson", {"d": 1.0, "beta": TF.sinusoid(2, 0.5, 1, 0)}),
    preset("arino", {"gamma": 2.0, "mu": 0.5, "kappa": 1.0, "tau": 1.0}),
]


@pytest.mark.parametrize("model", _models)
def test_zero_state_boundary(model):
    for t in np.linspace(0, 50, 101):
        assert eval_rhs(model, t, 0.0, [0.0] * len(model.recruitment)) >= 0.0


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 100), x=st.floats(0, 20),
       y=st.lists(st.floats(0, 20), min_size=2, max_size=2),
       bump=st.floats(0, 5), which=st.integers(0, 1))
def test_quasimonotone_in_delayed_entries(t, x, y, bump, which):
    model = preset("bh-logistic", {"alpha": [TF.sinusoid(2, 0.5, 1, 0), 1.0],
                                   "beta": [0.5, 0.0], "mu": 0.3, "kappa": 1.0})
    z = list(y)
    z[which] += bump
    assert eval_rhs(model, t, x, z) >= eval_rhs(model, t, x, y)


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 100), x=st.floats(0, 50), y=st.floats(0, 50))
def test_bh_with_zero_beta_equals_quadratic(t, x, y):
    alpha = TF.sinusoid(2, 1, 1, 0)
    kappa = TF.sinusoid(1.5, 0.5, 0.3, 1.0)
    quad = preset("bastinec-quadratic", {"alpha": alpha, "beta": kappa})
    bh = preset("bh-logistic", {"alpha": alpha, "beta": 0.0, "mu": 0.0, "kappa": kappa})
    assert eval_rhs(quad, t, x, [y]) == eval_rhs(bh, t, x, [y])
