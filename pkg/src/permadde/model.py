"""Model description: coefficient functions, delays, recruitment and mortality.

A model is the scalar delay equation

    x'(t) = rho(t) * [ sum_k R_k(t, y_k(t)) - mu(t) x(t) - kappa(t) x(t)^2 ]

where each aggregate ``y_k(t) = sum_j w_kj x(t - lag_kj(t))`` is a normalised
weighted sum of point delays and ``R_k`` is one of the recruitment kinds below.
All objects are frozen dataclasses; evaluation is pure.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ArityMismatch

ArrayLike = Union[float, np.ndarray]

TIME_KINDS = ("constant", "sinusoid", "piecewise-linear")
HISTORY_KINDS = ("constant", "sinusoid", "tabulated")
RECRUITMENT_KINDS = ("linear", "beverton-holt", "ricker", "capped-ricker")
MONOTONE_KINDS = ("linear", "beverton-holt", "capped-ricker")

DEFAULT_CHECK_HORIZON = 200.0
_EXP_M1 = math.exp(-1.0)


def check_horizon_default() -> float:
    """Sampling horizon for metadata checks; ``PERMADDE_CHECK_HORIZON`` overrides."""
    raw = os.environ.get("PERMADDE_CHECK_HORIZON")
    if raw:
        try:
            value = float(raw)
        except ValueError:
            return DEFAULT_CHECK_HORIZON
        if value > 0:
            return value
    return DEFAULT_CHECK_HORIZON


# ---------------------------------------------------------------------------
# coefficient functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeFunction:
    """A bounded coefficient of time with declared extrema.

    ``inf``/``sup`` bound the function on ``t >= 0``; ``tail_liminf`` and
    ``tail_limsup`` are its lower and upper limits as ``t -> oo``. They are
    declarations, checked by sampling in :func:`validate_model`.

    Use the constructors :meth:`constant`, :meth:`sinusoid` and
    :meth:`piecewise_linear`, which fill in exact metadata unless overridden.
    """

    kind: str
    params: tuple
    inf: float
    sup: float
    tail_liminf: float
    tail_limsup: float

    def __post_init__(self):
        if self.kind not in TIME_KINDS:
            raise ValueError(f"unknown time-function kind {self.kind!r}")

    @classmethod
    def constant(cls, c: float) -> "TimeFunction":
        c = float(c)
        return cls("constant", (c,), c, c, c, c)

    @classmethod
    def sinusoid(cls, a, b, omega, phase=0.0, *, inf=None, sup=None,
                 tail_liminf=None, tail_limsup=None) -> "TimeFunction":
        """``a + b*sin(omega*t + phase)``."""
        a, b, omega, phase = float(a), float(b), float(omega), float(phase)
        if omega == 0.0:
            lo = hi = a + b * math.sin(phase)
        else:
            lo, hi = a - abs(b), a + abs(b)
        return cls(
            "sinusoid",
            (a, b, omega, phase),
            lo if inf is None else float(inf),
            hi if sup is None else float(sup),
            lo if tail_liminf is None else float(tail_liminf),
            hi if tail_limsup is None else float(tail_limsup),
        )

    @classmethod
    def piecewise_linear(cls, knots, *, inf=None, sup=None,
                         tail_liminf=None, tail_limsup=None) -> "TimeFunction":
        """Linear interpolation through ``(t, value)`` knots, constant outside."""
        pts = tuple((float(t), float(v)) for t, v in knots)
        if not pts:
            raise ValueError("piecewise-linear needs at least one knot")
        ts = [p[0] for p in pts]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("knot times must be strictly increasing")
        at_zero = float(np.interp(0.0, ts, [p[1] for p in pts]))
        seen = [at_zero] + [v for t, v in pts if t > 0.0]
        last = pts[-1][1]
        return cls(
            "piecewise-linear",
            pts,
            min(seen) if inf is None else float(inf),
            max(seen) if sup is None else float(sup),
            last if tail_liminf is None else float(tail_liminf),
            last if tail_limsup is None else float(tail_limsup),
        )

    def with_metadata(self) -> "TimeFunction":
        """Same function with metadata recomputed from its parameters."""
        if self.kind == "constant":
            return TimeFunction.constant(self.params[0])
        if self.kind == "sinusoid":
            return TimeFunction.sinusoid(*self.params)
        return TimeFunction.piecewise_linear(self.params)

    def __call__(self, t: ArrayLike) -> ArrayLike:
        kind, p = self.kind, self.params
        if np.ndim(t) == 0:
            t = float(t)
            if kind == "constant":
                return p[0]
            if kind == "sinusoid":
                return p[0] + p[1] * math.sin(p[2] * t + p[3])
            return float(np.interp(t, self._knot_t, self._knot_v))
        t = np.asarray(t, dtype=float)
        if kind == "constant":
            return np.full(t.shape, p[0])
        if kind == "sinusoid":
            return p[0] + p[1] * np.sin(p[2] * t + p[3])
        return np.interp(t, self._knot_t, self._knot_v)

    @property
    def _knot_t(self):
        return [k[0] for k in self.params]

    @property
    def _knot_v(self):
        return [k[1] for k in self.params]

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    @property
    def is_zero(self) -> bool:
        """True when the declared range is exactly {0}."""
        return self.inf == 0.0 and self.sup == 0.0

    @property
    def period(self) -> float | None:
        if self.kind == "sinusoid" and self.params[2] != 0.0:
            return 2.0 * math.pi / abs(self.params[2])
        return None

    @property
    def last_knot(self) -> float:
        return self.params[-1][0] if self.kind == "piecewise-linear" else 0.0


def as_time_function(value) -> TimeFunction:
    if isinstance(value, TimeFunction):
        return value
    return TimeFunction.constant(value)


# ---------------------------------------------------------------------------
# model terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DelayTerm:
    """Normalised finite mixture of point delays: ``sum_j w_j x(t - lag_j(t))``."""

    atoms: tuple  # ((TimeFunction lag, float weight), ...)

    @classmethod
    def point(cls, lag) -> "DelayTerm":
        return cls(((as_time_function(lag), 1.0),))

    @classmethod
    def mixture(cls, lags: Sequence, weights: Sequence[float]) -> "DelayTerm":
        if len(lags) != len(weights):
            raise ValueError("lags and weights differ in length")
        return cls(tuple((as_time_function(g), float(w)) for g, w in zip(lags, weights)))

    @property
    def lags(self):
        return [a[0] for a in self.atoms]

    @property
    def weights(self):
        return [a[1] for a in self.atoms]


def recruitment_value(kind: str, alpha: ArrayLike, beta: ArrayLike, y: ArrayLike) -> ArrayLike:
    """Recruitment ``R(y)`` for given coefficient values (vectorised)."""
    if kind == "linear":
        return alpha * y
    if kind == "beverton-holt":
        return alpha * y / (1.0 + beta * y)
    if kind == "ricker":
        return alpha * y * np.exp(-y)
    if kind == "capped-ricker":
        if np.ndim(y) == 0:
            return alpha * (y * math.exp(-y) if y <= 1.0 else _EXP_M1)
        y = np.asarray(y, dtype=float)
        return alpha * np.where(y <= 1.0, y * np.exp(-np.minimum(y, 1.0)), _EXP_M1)
    raise ValueError(f"unknown recruitment kind {kind!r}")


def per_capita_value(kind: str, alpha: float, beta: float, x: float) -> float:
    """``R(x)/x`` with its right limit at ``x = 0``."""
    if kind == "linear":
        return alpha
    if kind == "beverton-holt":
        return alpha / (1.0 + beta * x)
    if kind == "ricker":
        return alpha * math.exp(-x)
    if kind == "capped-ricker":
        return alpha * (math.exp(-x) if x <= 1.0 else _EXP_M1 / x)
    raise ValueError(f"unknown recruitment kind {kind!r}")


@dataclass(frozen=True)
class RecruitmentTerm:
    kind: str
    alpha: TimeFunction
    delay: DelayTerm
    beta: TimeFunction | None = None

    def __post_init__(self):
        if self.kind not in RECRUITMENT_KINDS:
            raise ValueError(f"unknown recruitment kind {self.kind!r}")
        if self.kind == "beverton-holt" and self.beta is None:
            object.__setattr__(self, "beta", TimeFunction.constant(0.0))
        if self.kind != "beverton-holt" and self.beta is not None:
            raise ValueError(f"{self.kind} recruitment takes no beta")

    @property
    def monotone(self) -> bool:
        return self.kind in MONOTONE_KINDS

    def value(self, t: ArrayLike, y: ArrayLike) -> ArrayLike:
        beta = self.beta(t) if self.beta is not None else 0.0
        return recruitment_value(self.kind, self.alpha(t), beta, y)


@dataclass(frozen=True)
class MortalityTerm:
    """``D(t, x) = mu(t) x + kappa(t) x^2``."""

    mu: TimeFunction
    kappa: TimeFunction

    def value(self, t: ArrayLike, x: ArrayLike) -> ArrayLike:
        return self.mu(t) * x + self.kappa(t) * x * x


@dataclass(frozen=True)
class ModelSpec:
    recruitment: tuple
    mortality: MortalityTerm
    tau_max: float
    rho: TimeFunction = field(default_factory=lambda: TimeFunction.constant(1.0))

    def __post_init__(self):
        object.__setattr__(self, "recruitment", tuple(self.recruitment))
        object.__setattr__(self, "tau_max", float(self.tau_max))

    @property
    def cooperative(self) -> bool:
        return all(term.monotone for term in self.recruitment)

    def time_functions(self):
        """Yield ``(label, TimeFunction)`` for every coefficient and lag."""
        yield "rho", self.rho
        for k, term in enumerate(self.recruitment):
            yield f"recruitment[{k}].alpha", term.alpha
            if term.beta is not None:
                yield f"recruitment[{k}].beta", term.beta
            for j, (lag, _) in enumerate(term.delay.atoms):
                yield f"recruitment[{k}].delay[{j}].lag", lag
        yield "mortality.mu", self.mortality.mu
        yield "mortality.kappa", self.mortality.kappa

    def coefficient_functions(self):
        """Like :meth:`time_functions` without the lags."""
        return [(n, f) for n, f in self.time_functions() if not n.endswith(".lag")]


def eval_rhs(model: ModelSpec, t: float, x_now: float, delayed: Sequence[float]) -> float:
    """Right-hand side given one weight-aggregated delayed state per term."""
    if len(delayed) != len(model.recruitment):
        raise ArityMismatch(
            f"expected {len(model.recruitment)} delayed aggregates, got {len(delayed)}"
        )
    births = 0.0
    for term, y in zip(model.recruitment, delayed):
        births += term.value(t, y)
    return model.rho(t) * (births - model.mortality.value(t, x_now))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    """One failed model check.

    ``structural`` violations make the equation ill-posed for simulation;
    the others only block certification of bounds.
    """

    code: str
    where: str
    detail: str = ""
    structural: bool = True

    def __str__(self):
        return f"{self.code}({self.where}{': ' + self.detail if self.detail else ''})"


def _metadata_violations(label: str, f: TimeFunction, horizon: float, n: int) -> list:
    out = []
    eps = 1e-9 * max(1.0, abs(f.inf), abs(f.sup))
    if not (f.inf <= f.tail_liminf <= f.tail_limsup <= f.sup):
        out.append(Violation("InconsistentMetadata", label,
                             f"need inf <= tail_liminf <= tail_limsup <= sup, got "
                             f"{f.inf}, {f.tail_liminf}, {f.tail_limsup}, {f.sup}"))
    if f.is_constant:
        c = f.params[0]
        if not (f.inf == f.sup == f.tail_liminf == f.tail_limsup == c):
            out.append(Violation("InconsistentMetadata", label, "constant metadata must equal c"))
        return out
    ts = np.linspace(0.0, horizon, n)
    if f.kind == "piecewise-linear":
        ts = np.union1d(ts, [k for k in f._knot_t if 0.0 <= k])
    vals = f(ts)
    if vals.max() > f.sup + eps:
        i = int(vals.argmax())
        out.append(Violation("SampledValueExceedsDeclaredSup", label,
                             f"f({ts[i]:.6g}) = {vals[i]:.6g} > {f.sup}"))
    if vals.min() < f.inf - eps:
        i = int(vals.argmin())
        out.append(Violation("SampledValueBelowDeclaredInf", label,
                             f"f({ts[i]:.6g}) = {vals[i]:.6g} < {f.inf}"))
    start = max(horizon / 2.0, f.last_knot)
    tail = f(np.linspace(start, start + horizon / 2.0, n))
    if tail.max() > f.tail_limsup + eps or tail.min() < f.tail_liminf - eps:
        out.append(Violation("SampledTailOutsideDeclared", label,
                             f"tail samples span [{tail.min():.6g}, {tail.max():.6g}]"))
    return out


def validate_model(model: ModelSpec, check_horizon: float | None = None,
                   n_samples: int = 20001) -> list:
    """Return every :class:`Violation` found in ``model`` (empty if valid)."""
    horizon = check_horizon_default() if check_horizon is None else float(check_horizon)
    out = []
    if not model.tau_max > 0.0:
        out.append(Violation("NonPositiveTauMax", "tau_max", str(model.tau_max)))
    if not model.recruitment:
        out.append(Violation("EmptyRecruitment", "recruitment"))
    for label, f in model.time_functions():
        out.extend(_metadata_violations(label, f, horizon, n_samples))

    for k, term in enumerate(model.recruitment):
        where = f"recruitment[{k}]"
        atoms = term.delay.atoms
        if not atoms:
            out.append(Violation("EmptyDelay", where))
        if any(w <= 0.0 for _, w in atoms):
            out.append(Violation("NonPositiveWeight", where))
        if abs(sum(w for _, w in atoms) - 1.0) > 1e-12:
            out.append(Violation("WeightsNotNormalized", where,
                                 f"sum = {sum(w for _, w in atoms)!r}"))
        for j, (lag, _) in enumerate(atoms):
            if lag.sup > model.tau_max:
                out.append(Violation("LagExceedsTauMax", f"{where}.delay[{j}]",
                                     f"sup {lag.sup} > {model.tau_max}"))
            if lag.inf < 0.0:
                out.append(Violation("NegativeLag", f"{where}.delay[{j}]"))
        if term.alpha.inf < 0.0:
            out.append(Violation("NegativeCoefficient", f"{where}.alpha"))
        elif not term.alpha.inf > 0.0:
            out.append(Violation("AlphaNotBoundedAway", f"{where}.alpha", structural=False))
        if term.beta is not None and term.beta.inf < 0.0:
            out.append(Violation("NegativeCoefficient", f"{where}.beta"))

    mu, kappa = model.mortality.mu, model.mortality.kappa
    if mu.inf < 0.0:
        out.append(Violation("NegativeCoefficient", "mortality.mu"))
    if kappa.inf < 0.0:
        out.append(Violation("NegativeCoefficient", "mortality.kappa"))
    elif not kappa.inf > 0.0 and not (kappa.is_zero and mu.inf > 0.0):
        out.append(Violation("KappaNotBoundedAway", "mortality.kappa", structural=False))
    if model.rho.inf < 0.0:
        out.append(Violation("NegativeCoefficient", "rho"))
    elif not model.rho.inf > 0.0:
        out.append(Violation("RhoNotBoundedAway", "rho", structural=False))
    return out


# ---------------------------------------------------------------------------
# initial histories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HistorySpec:
    """Initial segment ``phi`` on ``[-tau_max, 0]``.

    kinds: ``constant`` (c,), ``sinusoid`` (a, b, omega, phase) and
    ``tabulated`` (((theta, value), ...)) with linear interpolation.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in HISTORY_KINDS:
            raise ValueError(f"unknown history kind {self.kind!r}")
        if self.kind == "tabulated":
            pts = tuple((float(a), float(b)) for a, b in self.params)
            if any(q[0] <= p[0] for p, q in zip(pts, pts[1:])):
                raise ValueError("tabulated history needs increasing times")
            object.__setattr__(self, "params", pts)
        else:
            object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @classmethod
    def constant(cls, c: float) -> "HistorySpec":
        return cls("constant", (c,))

    @classmethod
    def sinusoid(cls, a, b, omega, phase=0.0) -> "HistorySpec":
        return cls("sinusoid", (a, b, omega, phase))

    @classmethod
    def tabulated(cls, knots) -> "HistorySpec":
        return cls("tabulated", tuple(knots))

    def __call__(self, theta: ArrayLike) -> ArrayLike:
        p = self.params
        if self.kind == "constant":
            return p[0] if np.ndim(theta) == 0 else np.full(np.shape(theta), p[0])
        if self.kind == "sinusoid":
            if np.ndim(theta) == 0:
                return p[0] + p[1] * math.sin(p[2] * theta + p[3])
            return p[0] + p[1] * np.sin(p[2] * np.asarray(theta, dtype=float) + p[3])
        ts = [q[0] for q in p]
        vs = [q[1] for q in p]
        out = np.interp(theta, ts, vs)
        return float(out) if np.ndim(theta) == 0 else out

    def derivative(self, theta: ArrayLike) -> ArrayLike:
        p = self.params
        if self.kind == "constant":
            return 0.0 if np.ndim(theta) == 0 else np.zeros(np.shape(theta))
        if self.kind == "sinusoid":
            out = p[1] * p[2] * np.cos(p[2] * np.asarray(theta, dtype=float) + p[3])
            return float(out) if np.ndim(theta) == 0 else out
        ts = np.array([q[0] for q in p])
        vs = np.array([q[1] for q in p])
        if len(ts) == 1:
            slopes = np.zeros(1)
        else:
            slopes = np.append(np.diff(vs) / np.diff(ts), 0.0)
        i = np.searchsorted(ts, theta, side="right") - 1
        inside = (i >= 0) & (i < len(ts) - 1)
        out = np.where(inside, slopes[np.clip(i, 0, len(ts) - 1)], 0.0)
        return float(out) if np.ndim(theta) == 0 else out


def admissible(history: HistorySpec, tau_max: float, n_samples: int = 4001) -> bool:
    """True iff ``phi >= 0`` on ``[-tau_max, 0]`` and ``phi(0) > 0``."""
    thetas = np.linspace(-float(tau_max), 0.0, n_samples)
    if history.kind == "tabulated":
        knots = [t for t, _ in history.params if -tau_max <= t <= 0.0]
        thetas = np.union1d(thetas, knots)
    vals = np.asarray(history(thetas), dtype=float)
    if not np.all(np.isfinite(vals)) or vals.min() < 0.0:
        return False
    return float(history(0.0)) > 0.0
