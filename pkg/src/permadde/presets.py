"""Named model families.

=====================  ==========================================================
name                   equation
=====================  ==========================================================
bastinec-quadratic     x' = sum_k alpha_k(t) x(t - tau_k(t)) - beta(t) x^2
bastinec-constant      x' = r(t) [sum_k alpha_k x(t - tau_k(t)) - beta x^2]
bh-logistic            x' = sum_k alpha_k y_k / (1 + beta_k y_k) - mu x - kappa x^2
arino                  Beverton-Holt form of the Arino et al. delayed logistic model
nicholson              x' = -d(t) x + sum_k beta_k(t) y_k exp(-y_k)
nicholson-autonomous   constant-coefficient Nicholson blowflies equation
=====================  ==========================================================

``y_k = x(t - tau_k(t))``. Coefficient parameters accept numbers or
:class:`~permadde.model.TimeFunction` objects; list parameters accept a single
value, which is broadcast over the ``m`` terms.
"""

from __future__ import annotations

import math

from .errors import BadParams, UnknownPreset
from .model import (DelayTerm, ModelSpec, MortalityTerm, RecruitmentTerm,
                    TimeFunction, as_time_function)

PRESETS = (
    "bastinec-quadratic",
    "bastinec-constant",
    "bh-logistic",
    "arino",
    "nicholson",
    "nicholson-autonomous",
)

_ALLOWED = {
    "bastinec-quadratic": {"m", "alpha", "beta", "tau", "tau_max"},
    "bastinec-constant": {"m", "alpha", "beta", "tau", "r", "tau_max"},
    "bh-logistic": {"m", "alpha", "beta", "mu", "kappa", "tau", "tau_max"},
    "arino": {"gamma", "mu", "kappa", "tau", "tau_max"},
    "nicholson": {"m", "d", "beta", "tau", "tau_max"},
    "nicholson-autonomous": {"m", "d", "beta", "tau", "tau_max"},
}


def _listify(value):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _broadcast(name, value, m, default=None):
    vals = _listify(value)
    if vals is None:
        if default is None:
            raise BadParams(f"missing parameter {name!r}")
        vals = [default]
    if len(vals) == 1:
        vals = vals * m
    if len(vals) != m:
        raise BadParams(f"{name!r} has {len(vals)} entries, expected {m}")
    return [as_time_function(v) for v in vals]


def _term_count(params, key):
    vals = _listify(params.get(key))
    if vals is None:
        raise BadParams(f"missing parameter {key!r}")
    m = int(params.get("m", len(vals)))
    if m < 1:
        raise BadParams("m must be at least 1")
    if len(vals) not in (1, m):
        raise BadParams(f"m = {m} but {key!r} has {len(vals)} entries")
    return m


def _require_constant(name, fns):
    for f in fns:
        if not f.is_constant:
            raise BadParams(f"{name!r} must be constant for this preset")


def _tau_max(lags, params):
    if params.get("tau_max") is not None:
        return float(params["tau_max"])
    top = max(lag.sup for lag in lags)
    return top if top > 0.0 else 1.0


def _delays(params, m):
    lags = _broadcast("tau", params.get("tau"), m, default=1.0)
    return lags, [DelayTerm.point(lag) for lag in lags]


def preset(name: str, params: dict | None = None) -> ModelSpec:
    """Build the ModelSpec of a named family (see module docstring)."""
    params = dict(params or {})
    if name not in _ALLOWED:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    extra = set(params) - _ALLOWED[name]
    if extra:
        raise BadParams(f"{name}: unexpected parameters {sorted(extra)}")
    builder = {
        "bastinec-quadratic": _bastinec_quadratic,
        "bastinec-constant": _bastinec_constant,
        "bh-logistic": _bh_logistic,
        "arino": _arino,
        "nicholson": _nicholson,
        "nicholson-autonomous": _nicholson_autonomous,
    }[name]
    try:
        return builder(params)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, BadParams):
            raise
        raise BadParams(f"{name}: {exc}") from exc


def _bastinec_quadratic(params):
    m = _term_count(params, "alpha")
    alphas = _broadcast("alpha", params["alpha"], m)
    kappa = as_time_function(params.get("beta", 1.0))
    lags, delays = _delays(params, m)
    terms = [RecruitmentTerm("linear", a, d) for a, d in zip(alphas, delays)]
    return ModelSpec(terms, MortalityTerm(TimeFunction.constant(0.0), kappa),
                     _tau_max(lags, params))


def _bastinec_constant(params):
    m = _term_count(params, "alpha")
    alphas = _broadcast("alpha", params["alpha"], m)
    beta = as_time_function(params.get("beta", 1.0))
    _require_constant("alpha", alphas)
    _require_constant("beta", [beta])
    if min(a.params[0] for a in alphas) <= 0.0 or beta.params[0] <= 0.0:
        raise BadParams("bastinec-constant needs positive alpha_k and beta")
    lags, delays = _delays(params, m)
    rho = as_time_function(params.get("r", 1.0))
    terms = [RecruitmentTerm("linear", a, d) for a, d in zip(alphas, delays)]
    return ModelSpec(terms, MortalityTerm(TimeFunction.constant(0.0), beta),
                     _tau_max(lags, params), rho=rho)


def _bh_logistic(params):
    m = _term_count(params, "alpha")
    alphas = _broadcast("alpha", params["alpha"], m)
    betas = _broadcast("beta", params.get("beta"), m, default=0.0)
    lags, delays = _delays(params, m)
    mu = as_time_function(params.get("mu", 0.0))
    kappa = as_time_function(params.get("kappa", 1.0))
    terms = [RecruitmentTerm("beverton-holt", a, d, beta=b)
             for a, b, d in zip(alphas, betas, delays)]
    return ModelSpec(terms, MortalityTerm(mu, kappa), _tau_max(lags, params))


def _arino(params):
    try:
        gamma, mu = float(params["gamma"]), float(params["mu"])
        kappa = float(params.get("kappa", 1.0))
        tau = float(params.get("tau", 1.0))
    except KeyError as exc:
        raise BadParams(f"arino: missing parameter {exc.args[0]!r}") from None
    if mu == 0.0:
        raise BadParams("arino: mu must be nonzero (the scaling divides by mu)")
    if tau < 0.0:
        raise BadParams("arino: tau must be nonnegative")
    decay = math.exp(-mu * tau)
    alpha = TimeFunction.constant(gamma * decay)
    beta = TimeFunction.constant(kappa * (1.0 - decay) / mu)
    lag = TimeFunction.constant(tau)
    term = RecruitmentTerm("beverton-holt", alpha, DelayTerm.point(lag), beta=beta)
    mortality = MortalityTerm(TimeFunction.constant(mu), TimeFunction.constant(kappa))
    return ModelSpec([term], mortality, _tau_max([lag], params))


def _nicholson(params):
    m = _term_count(params, "beta")
    betas = _broadcast("beta", params["beta"], m)
    lags, delays = _delays(params, m)
    d = as_time_function(params.get("d", 1.0))
    terms = [RecruitmentTerm("ricker", b, dl) for b, dl in zip(betas, delays)]
    return ModelSpec(terms, MortalityTerm(d, TimeFunction.constant(0.0)),
                     _tau_max(lags, params))


def _nicholson_autonomous(params):
    model = _nicholson(params)
    fns = [model.mortality.mu] + [t.alpha for t in model.recruitment]
    fns += [lag for t in model.recruitment for lag in t.delay.lags]
    _require_constant("d, beta and tau", fns)
    return model
