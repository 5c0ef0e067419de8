"""Hypothesis checks, comparison envelopes and explicit permanence bounds.

The engine follows the comparison strategy for cooperative delay equations.
It sandwiches the model between two equations with constant coefficients,
one under-estimating and one over-estimating the right-hand side. The
positive equilibria ``K_l`` and ``K_u`` of these two equations bound
``liminf x`` and ``limsup x`` of every positive solution. Four families also
have closed-form bounds ``(m0, M0)`` built from tail extrema of coefficient
combinations. The report intersects everything whose preconditions hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (EnvelopeUnavailable, FamilyMismatch, NoSignChange,
                     UnsupportedFamily)
from .model import (ModelSpec, MortalityTerm, RecruitmentTerm,
                    TimeFunction, per_capita_value)

FAMILIES = ("quadratic", "beverton-holt", "nicholson", "general")

TAIL_START = 100.0
TAIL_SAMPLES = 4096
TAIL_MIN_WINDOW = 100.0
TAIL_PERIODS = 8
ROUNDOFF = 1e-9

# hypothesis name -> families it applies to
CONDITIONS = {
    "coefficients-bounded": ("quadratic", "beverton-holt"),
    "birth-exceeds-mortality": ("beverton-holt",),
    "birth-exceeds-death": ("nicholson",),
    "birth-below-e-death": ("nicholson",),
    "rho-bounded-away": FAMILIES,
    "envelope-monotone": FAMILIES,
    "envelope-roots": FAMILIES,
}

_FAMILY_CONDITIONS = {
    "quadratic": ("coefficients-bounded",),
    "beverton-holt": ("coefficients-bounded", "birth-exceeds-mortality"),
    "nicholson": ("birth-exceeds-death", "birth-below-e-death"),
    "general": (),
}


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


def _beta_zero(term: RecruitmentTerm) -> bool:
    return term.kind == "linear" or (term.kind == "beverton-holt" and term.beta.is_zero)


def infer_family(model: ModelSpec) -> str:
    """Classify ``model`` from its structure and declared metadata."""
    terms = model.recruitment
    mort = model.mortality
    if all(t.kind in ("ricker", "capped-ricker") for t in terms) and mort.kappa.is_zero:
        return "nicholson"
    if all(_beta_zero(t) for t in terms) and mort.mu.is_zero:
        return "quadratic"
    if all(t.kind in ("linear", "beverton-holt") for t in terms):
        return "beverton-holt"
    return "general"


def _resolve_family(model: ModelSpec, family: str | None) -> str:
    """Return the family to use, checking that a requested coercion is legal."""
    natural = infer_family(model)
    if family is None or family == natural:
        return natural
    if family not in FAMILIES:
        raise FamilyMismatch(f"unknown family {family!r}")
    # quadratic models are Beverton-Holt models with beta_k = 0 and mu = 0
    if family == "general" or (family == "beverton-holt" and natural == "quadratic"):
        return family
    raise FamilyMismatch(f"a {natural} model cannot be treated as {family}")


# ---------------------------------------------------------------------------
# hypotheses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HypothesisVerdict:
    name: str
    passed: bool
    margin: float

    def to_dict(self):
        return {"name": self.name, "pass": self.passed, "margin": _json_float(self.margin)}


def _verdict(name, margin):
    return HypothesisVerdict(name, bool(margin > 0.0), float(margin))


def _ricker_alphas(model):
    return [t.alpha for t in model.recruitment if t.kind in ("ricker", "capped-ricker")]


def check_condition(model: ModelSpec, name: str, family: str | None = None) -> HypothesisVerdict:
    """Evaluate one named hypothesis from declared metadata.

    ``margin`` is satisfied side minus threshold; the verdict passes iff
    ``margin > 0``. Raises FamilyMismatch when ``name`` does not apply.
    """
    fam = _resolve_family(model, family)
    if name not in CONDITIONS:
        raise FamilyMismatch(f"unknown hypothesis {name!r}")
    if fam not in CONDITIONS[name]:
        raise FamilyMismatch(f"{name} does not apply to the {fam} family")
    terms, mort = model.recruitment, model.mortality

    if name == "coefficients-bounded":
        lows = [t.alpha.inf for t in terms] + [mort.kappa.inf]
        highs = [t.alpha.sup for t in terms] + [mort.kappa.sup]
        margin = min(lows) if all(math.isfinite(v) for v in highs) else -math.inf
        return _verdict(name, margin)
    if name == "birth-exceeds-mortality":
        return _verdict(name, sum(t.alpha.inf for t in terms) - mort.mu.sup)
    if name == "birth-exceeds-death":
        return _verdict(name, sum(a.inf for a in _ricker_alphas(model)) - mort.mu.sup)
    if name == "birth-below-e-death":
        return _verdict(name, math.e * mort.mu.inf - sum(a.sup for a in _ricker_alphas(model)))
    if name == "rho-bounded-away":
        return _verdict(name, model.rho.inf)
    if name == "envelope-monotone":
        try:
            env = build_envelopes(model)
        except EnvelopeUnavailable:
            return _verdict(name, -1.0)
        ok = env.lower.cooperative and env.upper.cooperative
        return _verdict(name, 1.0 if ok else -1.0)
    # envelope-roots
    try:
        k_l, k_u = equilibrium_bounds(build_envelopes(model))
    except (EnvelopeUnavailable, NoSignChange):
        return _verdict(name, -math.inf)
    return _verdict(name, min(k_l, k_u))


def check_hypotheses(model: ModelSpec, family: str | None = None) -> list:
    """All hypotheses applicable to the model's family, in a fixed order."""
    fam = _resolve_family(model, family)
    names = list(_FAMILY_CONDITIONS[fam]) + ["rho-bounded-away", "envelope-monotone",
                                             "envelope-roots"]
    return [check_condition(model, n, fam) for n in names]


# ---------------------------------------------------------------------------
# envelopes and equilibria
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvelopePair:
    lower: ModelSpec
    upper: ModelSpec


def _const(v):
    return TimeFunction.constant(v)


def _envelope_term(term: RecruitmentTerm, upper: bool) -> RecruitmentTerm:
    a = _const(term.alpha.sup if upper else term.alpha.inf)
    if term.kind == "linear":
        return RecruitmentTerm("linear", a, term.delay)
    if term.kind == "beverton-holt":
        b = _const(term.beta.inf if upper else term.beta.sup)
        return RecruitmentTerm("beverton-holt", a, term.delay, beta=b)
    # y exp(-y) is increasing only up to 1; the capped version is its
    # nondecreasing majorant and coincides with it on [0, 1]
    return RecruitmentTerm("capped-ricker", a, term.delay)


def build_envelopes(model: ModelSpec) -> EnvelopePair:
    """Constant-coefficient comparison equations below and above ``model``.

    Upper: sup of birth rates, inf of Beverton-Holt saturation and of
    mortality. Lower: the opposite choices. ``rho`` and the delays are kept
    as they are, so the right-hand sides are ordered pointwise in t.
    """
    mort = model.mortality
    if not (mort.kappa.inf > 0.0 or mort.mu.inf > 0.0):
        raise EnvelopeUnavailable("neither kappa nor mu is bounded away from zero")
    lower = ModelSpec([_envelope_term(t, False) for t in model.recruitment],
                      MortalityTerm(_const(mort.mu.sup), _const(mort.kappa.sup)),
                      model.tau_max, rho=model.rho)
    upper = ModelSpec([_envelope_term(t, True) for t in model.recruitment],
                      MortalityTerm(_const(mort.mu.inf), _const(mort.kappa.inf)),
                      model.tau_max, rho=model.rho)
    if any(t.kind in ("ricker", "capped-ricker") for t in model.recruitment):
        g_u = per_capita_balance(upper)
        k_u = positive_root(g_u) if g_u(0.0) > 0.0 else 0.0
        if k_u >= 1.0:
            raise EnvelopeUnavailable(
                f"upper equilibrium {k_u:.6g} >= 1: the capped Ricker majorant is not "
                "tight there, so the comparison is not cooperative")
    return EnvelopePair(lower, upper)


def per_capita_balance(model: ModelSpec) -> Callable[[float], float]:
    """``x -> sum_k R_k(x)/x - D(x)/x`` for a constant-coefficient model."""
    parts = []
    for term in model.recruitment:
        beta = term.beta.params[0] if term.beta is not None else 0.0
        parts.append((term.kind, term.alpha.params[0], beta))
    mu = model.mortality.mu.params[0]
    kappa = model.mortality.kappa.params[0]

    def g(x: float) -> float:
        return sum(per_capita_value(k, a, b, x) for k, a, b in parts) - (mu + kappa * x)

    return g


def positive_root(g: Callable[[float], float], tol: float = 1e-12,
                  max_doublings: int = 60) -> float:
    """Root of a decreasing function with ``g(0) > 0``.

    The bracket ``[0, 2^k]`` is doubled until ``g`` changes sign, then
    bisected down to width ``tol`` (or floating-point resolution).
    """
    if not g(0.0) > 0.0:
        raise ValueError("positive_root needs g(0) > 0")
    lo, hi = 0.0, 1.0
    for _ in range(max_doublings + 1):
        g_hi = g(hi)
        if g_hi == 0.0:
            return hi
        if g_hi < 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NoSignChange(f"g stays positive up to {hi / 2.0:.3g}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = g(mid)
        if g_mid == 0.0:
            return mid
        if g_mid > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def equilibrium_bounds(envelopes: EnvelopePair) -> tuple:
    """``(K_l, K_u)``: positive equilibria of the lower and upper envelopes.

    An envelope whose balance is nonpositive at 0 has zero as its only
    equilibrium; the corresponding bound is reported as 0.
    """
    out = []
    for env in (envelopes.lower, envelopes.upper):
        g = per_capita_balance(env)
        out.append(positive_root(g) if g(0.0) > 0.0 else 0.0)
    return tuple(out)


# ---------------------------------------------------------------------------
# closed-form bounds
# ---------------------------------------------------------------------------


def _tail_window(fns, tail_start, window):
    start = max([tail_start] + [f.last_knot for f in fns])
    if window is None:
        periods = [f.period for f in fns if f.period is not None]
        window = max([TAIL_MIN_WINDOW] + [TAIL_PERIODS * p for p in periods])
    return start, start + window


def sampled_tail_range(fn: Callable, fns, tail_start: float = TAIL_START,
                       window: float | None = None, n_samples: int = TAIL_SAMPLES) -> tuple:
    """``(min, max)`` of ``fn`` over the tail window.

    The window is sampled on a uniform grid and each extremum is then
    polished by bounded scalar minimisation between the neighbouring samples.
    ``fns`` are the coefficient functions entering ``fn``; they set the
    window start (after the last knot) and length (8 periods, at least 100).
    """
    a, b = _tail_window(fns, tail_start, window)
    ts = np.linspace(a, b, n_samples)
    vals = np.asarray(fn(ts), dtype=float)
    if np.ptp(vals) == 0.0:
        return float(vals[0]), float(vals[0])
    step = ts[1] - ts[0]
    out = []
    for sign in (1.0, -1.0):
        j = int(np.argmin(sign * vals))
        best = float(vals[j])
        lo, hi = max(a, ts[j] - step), min(b, ts[j] + step)
        res = minimize_scalar(lambda s: sign * float(fn(np.array([s]))[0]),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        cand = sign * float(res.fun)
        best = min(best, cand) if sign > 0 else max(best, cand)
        out.append(best)
    return out[0], out[1]


def _sum_of(fns):
    def total(t):
        acc = fns[0](t)
        for f in fns[1:]:
            acc = acc + f(t)
        return acc
    return total


def closed_form_bounds(model: ModelSpec, family: str | None = None,
                       tail_start: float = TAIL_START, window: float | None = None,
                       n_samples: int = TAIL_SAMPLES) -> tuple:
    """Explicit ``(m0, M0)`` for the quadratic, Beverton-Holt and Nicholson families.

    Tail extrema of each composite (for instance ``(sum alpha - mu)/kappa``)
    are taken on the composite itself, never by combining the extrema of its
    parts. The Beverton-Holt lower bound with some ``beta_k > 0`` is
    ``c0/c1`` from global inf/sup. Raises UnsupportedFamily for the general
    family.
    """
    fam = _resolve_family(model, family)
    terms, mort = model.recruitment, model.mortality
    alphas = [t.alpha for t in terms]
    opts = dict(tail_start=tail_start, window=window, n_samples=n_samples)

    if fam == "quadratic":
        birth = _sum_of(alphas)
        ratio = lambda t: birth(t) / mort.kappa(t)  # noqa: E731
        return sampled_tail_range(ratio, alphas + [mort.kappa], **opts)

    if fam == "beverton-holt":
        birth = _sum_of(alphas)
        ratio = lambda t: (birth(t) - mort.mu(t)) / mort.kappa(t)  # noqa: E731
        fns = alphas + [mort.mu, mort.kappa]
        lo, hi = sampled_tail_range(ratio, fns, **opts)
        if all(_beta_zero(t) for t in terms):
            return lo, hi
        c0 = sum(a.inf for a in alphas) - mort.mu.sup
        c1 = mort.kappa.sup + sum(t.alpha.inf * (t.beta.sup if t.beta is not None else 0.0)
                                  for t in terms)
        return c0 / c1, hi

    if fam == "nicholson":
        birth = _sum_of(alphas)
        level = lambda t: np.log(birth(t) / mort.mu(t))  # noqa: E731
        return sampled_tail_range(level, alphas + [mort.mu], **opts)

    raise UnsupportedFamily("no closed-form bounds for the general family; "
                            "use equilibrium_bounds")


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _json_float(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return None
    return float(v)


@dataclass
class BoundsReport:
    family: str
    hypotheses: list
    m0: float | None
    M0: float | None
    K_l: float | None
    K_u: float | None
    certified: tuple
    permanent: bool
    warnings: list = field(default_factory=list)

    def verdict(self, name):
        for h in self.hypotheses:
            if h.name == name:
                return h
        raise KeyError(name)

    @property
    def all_pass(self) -> bool:
        return all(h.passed for h in self.hypotheses)

    def to_dict(self):
        return {
            "family": self.family,
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "m0": _json_float(self.m0),
            "M0": _json_float(self.M0),
            "K_l": _json_float(self.K_l),
            "K_u": _json_float(self.K_u),
            "certified": [_json_float(self.certified[0]), _json_float(self.certified[1])],
            "permanent": self.permanent,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, doc):
        def num(v, default=None):
            return default if v is None else float(v)

        hyps = [HypothesisVerdict(h["name"], bool(h["pass"]),
                                  num(h.get("margin"), -math.inf))
                for h in doc.get("hypotheses", [])]
        lo, hi = doc["certified"]
        return cls(doc["family"], hyps, num(doc.get("m0")), num(doc.get("M0")),
                   num(doc.get("K_l")), num(doc.get("K_u")),
                   (num(lo, 0.0), num(hi, math.inf)), bool(doc["permanent"]),
                   list(doc.get("warnings", [])))


def bounds_report(model: ModelSpec, family: str | None = None, **tail_opts) -> BoundsReport:
    """Run every check and combine the bounds whose preconditions hold.

    The certified interval is ``[max of lower bounds, min of upper bounds]``.
    The model is reported permanent iff that interval has a positive lower
    end and a finite upper end, and ``rho`` is bounded away from zero.
    """
    fam = _resolve_family(model, family)
    hyps = check_hypotheses(model, fam)
    passed = {h.name: h.passed for h in hyps}
    notes = []

    k_l = k_u = None
    try:
        env = build_envelopes(model)
        k_l, k_u = equilibrium_bounds(env)
    except EnvelopeUnavailable as exc:
        notes.append(f"envelopes unavailable: {exc}")
    except NoSignChange as exc:
        notes.append(f"envelope equilibrium not found: {exc}")
    if not passed["envelope-monotone"]:
        k_l = k_u = None

    m0 = M0 = None
    if fam != "general" and all(passed[n] for n in _FAMILY_CONDITIONS[fam]):
        m0, M0 = closed_form_bounds(model, fam, **tail_opts)
    if fam == "nicholson" and m0 is not None:
        notes.append("certification relies on the capped Ricker envelope; it does not "
                     "cover the non-cooperative regime sum(beta) > e*inf(d)")

    lowers = [v for v in (m0, k_l) if v is not None]
    uppers = [v for v in (M0, k_u) if v is not None]
    lo = max(lowers) if lowers else 0.0
    hi = min(uppers) if uppers else math.inf
    if hi < lo <= hi + ROUNDOFF * max(1.0, abs(lo)):
        # closed forms and envelope roots agree in exact arithmetic here
        lo, hi = hi, lo
    permanent = bool(lo > 0.0 and math.isfinite(hi) and lo <= hi and passed["rho-bounded-away"])
    if k_l == 0.0:
        notes.append("lower envelope has zero as its only equilibrium; permanence not certified")
    return BoundsReport(fam, hyps, m0, M0, k_l, k_u, (lo, hi), permanent, notes)
