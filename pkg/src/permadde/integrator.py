"""Fixed-step RK4 integration of delay models by the method of steps.

Delayed arguments are resolved from already accepted nodes with cubic
Hermite interpolation on the stored values ``x_i`` and derivatives ``f_i``.
Arguments at or before ``t = 0`` read the history function exactly. When an
argument falls inside the step being taken (delays shorter than ``h``, or
vanishing delays) it is extrapolated linearly from the last accepted node.

Because the step grid is fixed, every delayed argument and every
interpolation weight is known before the run starts. They are tabulated up
front and the step loop itself only does arithmetic. The loop is compiled
with numba when it is importable.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (InadmissibleHistory, InvalidModel, NonFiniteValue,
                     OutOfRange, PositivityLoss)
from .model import HistorySpec, ModelSpec, RECRUITMENT_KINDS, validate_model

try:  # pragma: no cover - exercised implicitly
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None

_KIND_CODE = {kind: i for i, kind in enumerate(RECRUITMENT_KINDS)}


class SolverWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Step size ``h``, horizon ``T`` and bookkeeping options.

    ``record_stride`` keeps every n-th node in the returned trajectory.
    ``positivity_tolerance`` is how far below zero a value may dip before
    the run is aborted. ``check_horizon`` feeds :func:`validate_model`.
    """

    h: float = 0.01
    T: float = 100.0
    record_stride: int = 1
    positivity_tolerance: float = 1e-9
    check_horizon: float | None = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        if self.positivity_tolerance < 0:
            raise ValueError("positivity_tolerance must be nonnegative")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.T / self.h - 1e-9))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded solution on a uniform grid starting at the history segment."""

    t: np.ndarray
    x: np.ndarray
    f: np.ndarray
    spacing: float
    tau_max: float
    n_history: int
    history: HistorySpec

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def forward(self) -> slice:
        """Slice selecting nodes with ``t >= 0``."""
        return slice(self.n_history, None)

    def sample(self, t):
        """Dense output; see :func:`sample_trajectory`."""
        if np.ndim(t):
            return np.array([self.sample(float(s)) for s in np.ravel(t)]).reshape(np.shape(t))
        t = float(t)
        slack = 1e-9 * max(1.0, self.T)
        if t < -self.tau_max - self.spacing - slack or t > self.T + slack:
            raise OutOfRange(f"t = {t} outside [{-self.tau_max}, {self.T}]")
        if t <= 0.0:
            return float(self.history(t))
        i = self.n_history + int(math.floor(t / self.spacing))
        i = min(i, len(self.t) - 1)
        if self.t[i] == t:
            return float(self.x[i])
        if i == len(self.t) - 1:
            i -= 1
        th = (t - self.t[i]) / self.spacing
        return float(_hermite(th, self.spacing, self.x[i], self.x[i + 1], self.f[i], self.f[i + 1]))

    def to_csv(self, path=None, include_f=False, include_history=True):
        """Write ``t,x[,f]`` rows with 17 significant digits.

        Returns the text when ``path`` is None.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "f"] if include_f else ["t", "x"])
        start = 0 if include_history else self.n_history
        for i in range(start, len(self.t)):
            row = [self.t[i], self.x[i]] + ([self.f[i]] if include_f else [])
            w.writerow([format(float(v), ".17g") for v in row])
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return None


def sample_trajectory(traj: Trajectory, t):
    """Stored value at nodes, cubic Hermite in between, history for ``t <= 0``."""
    return traj.sample(t)


def _hermite(th, h, x0, x1, f0, f1):
    th2 = th * th
    om = 1.0 - th
    return ((1.0 + 2.0 * th) * om * om * x0 + th * om * om * h * f0
            + th2 * (3.0 - 2.0 * th) * x1 + th2 * (th - 1.0) * h * f1)


# ---------------------------------------------------------------------------
# step loop
# ---------------------------------------------------------------------------


def _step_loop(h, N, x, f, idx, cx0, cx1, cf0, cf1, hv, weight, term_of,
               kind, alpha, beta, mu, kappa, rho, tol):
    K = alpha.shape[0]
    A = weight.shape[0]
    y = np.zeros((3, K))
    emin1 = math.exp(-1.0)
    for n in range(N + 1):
        last = n == N
        for s in range(1 if last else 3):
            for k in range(K):
                y[s, k] = 0.0
            for a in range(A):
                i = idx[n, s, a]
                v = (hv[n, s, a] + cx0[n, s, a] * x[i] + cx1[n, s, a] * x[i + 1]
                     + cf0[n, s, a] * f[i] + cf1[n, s, a] * f[i + 1])
                y[s, term_of[a]] += weight[a] * v
            if s == 0:
                # k1 doubles as the stored node derivative f_n
                q = 2 * n
                xv = x[n]
                births = 0.0
                for k in range(K):
                    births += _term(kind[k], alpha[k, q], beta[k, q], y[0, k], emin1)
                f[n] = rho[q] * (births - mu[q] * xv - kappa[q] * xv * xv)
        if last:
            break
        x0 = x[n]
        k1 = f[n]
        stage_x = x0 + 0.5 * h * k1
        q = 2 * n + 1
        births = 0.0
        for k in range(K):
            births += _term(kind[k], alpha[k, q], beta[k, q], y[1, k], emin1)
        k2 = rho[q] * (births - mu[q] * stage_x - kappa[q] * stage_x * stage_x)
        stage_x = x0 + 0.5 * h * k2
        k3 = rho[q] * (births - mu[q] * stage_x - kappa[q] * stage_x * stage_x)
        stage_x = x0 + h * k3
        q = 2 * n + 2
        births = 0.0
        for k in range(K):
            births += _term(kind[k], alpha[k, q], beta[k, q], y[2, k], emin1)
        k4 = rho[q] * (births - mu[q] * stage_x - kappa[q] * stage_x * stage_x)
        xn = x0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x[n + 1] = xn
        if not math.isfinite(xn):
            return 1, n + 1
        if xn < -tol:
            return 2, n + 1
    if not math.isfinite(f[N]):
        return 1, N
    return 0, N


def _term(code, a, b, y, emin1):
    if code == 0:
        return a * y
    if code == 1:
        return a * y / (1.0 + b * y)
    if code == 2:
        return a * y * math.exp(-y)
    if y <= 1.0:
        return a * y * math.exp(-y)
    return a * emin1


if njit is not None:
    _term = njit(cache=True, nogil=True)(_term)
    _step_loop = njit(cache=True, nogil=True)(_step_loop)


# ---------------------------------------------------------------------------
# tabulation of delayed arguments
# ---------------------------------------------------------------------------


class _Plan:
    """History-independent tables for one (model, config) pair."""

    def __init__(self, model: ModelSpec, cfg: SolverConfig):
        h = float(cfg.h)
        N = cfg.n_steps
        self.h, self.N = h, N
        self.tau_max = model.tau_max
        tq = (np.arange(2 * N + 1) * h) / 2.0
        terms = model.recruitment
        K = len(terms)
        self.kind = np.array([_KIND_CODE[t.kind] for t in terms], dtype=np.int64)
        self.alpha = np.ascontiguousarray(np.vstack([np.broadcast_to(t.alpha(tq), tq.shape) for t in terms]))
        self.beta = np.ascontiguousarray(np.vstack([
            np.broadcast_to(t.beta(tq), tq.shape) if t.beta is not None else np.zeros_like(tq)
            for t in terms]))
        self.mu = np.ascontiguousarray(model.mortality.mu(tq), dtype=float)
        self.kappa = np.ascontiguousarray(model.mortality.kappa(tq), dtype=float)
        self.rho = np.ascontiguousarray(model.rho(tq), dtype=float)

        atoms = [(k, lag, w) for k in range(K) for lag, w in terms[k].delay.atoms]
        A = len(atoms)
        self.term_of = np.array([a[0] for a in atoms], dtype=np.int64)
        self.weight = np.array([a[2] for a in atoms], dtype=float)

        n = np.arange(N + 1)[:, None]
        s = np.arange(3)[None, :]
        q = np.minimum(2 * n + s, 2 * N)
        tstage = tq[q]
        # the last node with a known derivative: f_n is still unknown at stage 0
        L = np.where(s == 0, n - 1, n) + np.zeros_like(q)
        shape = (N + 1, 3, A)
        self.idx = np.zeros(shape, dtype=np.int64)
        self.cx0 = np.zeros(shape)
        self.cx1 = np.zeros(shape)
        self.cf0 = np.zeros(shape)
        self.cf1 = np.zeros(shape)
        self.hist_mask = np.zeros(shape, dtype=bool)
        self.sd = np.zeros(shape)
        for a, (_, lag, _) in enumerate(atoms):
            sd = tstage - lag(tstage)
            hist = sd <= 0.0
            herm = ~hist & (sd <= L * h)
            rest = ~hist & ~herm
            quad = rest & (s == 0)
            extrap = rest & (s > 0)

            i = np.clip(np.floor(sd / h).astype(np.int64), 0, np.maximum(L - 1, 0))
            th = (sd - i * h) / h
            th2, om = th * th, 1.0 - th
            self._put(a, herm, i, (1 + 2 * th) * om * om, th2 * (3 - 2 * th),
                      th * om * om * h, th2 * (th - 1) * h)

            iq = np.maximum(n - 1, 0) + np.zeros_like(q)
            thq = (sd - iq * h) / h
            self._put(a, quad, iq, 1 - thq * thq, thq * thq, h * (thq - thq * thq), 0.0)

            ie = n + np.zeros_like(q)
            self._put(a, extrap, ie, 1.0, 0.0, sd - ie * h, 0.0)

            self.hist_mask[:, :, a] = hist
            self.sd[:, :, a] = sd

    def _put(self, a, mask, i, cx0, cx1, cf0, cf1):
        for name, val in (("cx0", cx0), ("cx1", cx1), ("cf0", cf0), ("cf1", cf1)):
            arr = getattr(self, name)
            arr[:, :, a] = np.where(mask, val, arr[:, :, a])
        self.idx[:, :, a] = np.where(mask, i, self.idx[:, :, a])

    def run(self, history: HistorySpec, cfg: SolverConfig) -> Trajectory:
        h, N = self.h, self.N
        hv = np.zeros_like(self.sd)
        if self.hist_mask.any():
            hv[self.hist_mask] = np.asarray(history(self.sd[self.hist_mask]), dtype=float)
        x = np.zeros(N + 2)
        f = np.zeros(N + 2)
        x[0] = float(history(0.0))
        status, at = _step_loop(h, N, x, f, self.idx, self.cx0, self.cx1, self.cf0,
                                self.cf1, hv, self.weight, self.term_of, self.kind,
                                self.alpha, self.beta, self.mu, self.kappa, self.rho,
                                float(cfg.positivity_tolerance))
        if status == 1:
            raise NonFiniteValue(f"non-finite state at t = {at * h:.6g}")
        if status == 2:
            raise PositivityLoss(
                f"x({at * h:.6g}) = {x[at]:.3e} below -{cfg.positivity_tolerance:g}; "
                "reduce the step size")

        stride = int(cfg.record_stride)
        M = int(math.ceil(self.tau_max / h - 1e-9))
        back = np.arange(-M, 0)
        back = back[(-back) % stride == 0]
        th = back * h
        fwd = np.arange(0, N + 1, stride)
        t = np.concatenate([th, fwd * h])
        xs = np.concatenate([np.asarray(history(th), dtype=float).reshape(-1), x[fwd]])
        fs = np.concatenate([np.asarray(history.derivative(th), dtype=float).reshape(-1), f[fwd]])
        for arr in (t, xs, fs):
            arr.setflags(write=False)
        return Trajectory(t, xs, fs, h * stride, self.tau_max, len(back), history)


def _check_inputs(model: ModelSpec, history: HistorySpec, cfg: SolverConfig):
    bad = [v for v in validate_model(model, check_horizon=cfg.check_horizon) if v.structural]
    if bad:
        raise InvalidModel(bad)
    thetas = np.linspace(-model.tau_max, 0.0, 2001)
    vals = np.asarray(history(thetas), dtype=float)
    if not np.all(np.isfinite(vals)) or vals.min() < 0.0:
        raise InadmissibleHistory("history must be finite and nonnegative on [-tau_max, 0]")
    if cfg.h > model.tau_max:
        warnings.warn(f"h = {cfg.h} exceeds tau_max = {model.tau_max}", SolverWarning, stacklevel=3)
    if cfg.T < 10 * model.tau_max:
        warnings.warn("T < 10*tau_max: too short for asymptotic use", SolverWarning, stacklevel=3)


def integrate(model: ModelSpec, history: HistorySpec, cfg: SolverConfig) -> Trajectory:
    """Integrate ``model`` from ``history`` over ``[0, T]`` with classical RK4.

    Raises InvalidModel for structural model violations, InadmissibleHistory
    for histories leaving the nonnegative cone, NonFiniteValue on overflow
    and PositivityLoss when a value drops below ``-positivity_tolerance``.
    """
    _check_inputs(model, history, cfg)
    return _Plan(model, cfg).run(history, cfg)


def integrate_many(model: ModelSpec, histories: Sequence[HistorySpec], cfg: SolverConfig,
                   workers: int | None = None) -> list:
    """Integrate one model from several histories; results keep input order."""
    for hist in histories:
        _check_inputs(model, hist, cfg)
    plan = _Plan(model, cfg)
    if workers is None or workers <= 1 or len(histories) < 2:
        return [plan.run(hist, cfg) for hist in histories]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda hist: plan.run(hist, cfg), histories))


class OrderEstimate(NamedTuple):
    order: float | None
    degenerate: bool
    differences: tuple


def self_convergence_order(model: ModelSpec, history: HistorySpec, h_base: float,
                           T: float = 10.0, exact: float | None = None) -> OrderEstimate:
    """Observed order from runs at ``h``, ``h/2`` and ``h/4``, read at ``t = T``.

    Without ``exact`` this is the Richardson estimate
    ``log2(|x_h - x_{h/2}| / |x_{h/2} - x_{h/4}|)``. With an exact value the
    errors against it replace the successive differences. ``degenerate`` is
    set, and ``order`` is None, when a difference is below 1e-13.
    """
    finals = []
    for div in (1, 2, 4):
        cfg = SolverConfig(h=h_base / div, T=T)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SolverWarning)
            traj = integrate(model, history, cfg)
        finals.append(traj.sample(T))
    if exact is None:
        d1 = abs(finals[0] - finals[1])
        d2 = abs(finals[1] - finals[2])
    else:
        d1 = abs(finals[0] - exact)
        d2 = abs(finals[1] - exact)
    if d1 < 1e-13 or d2 < 1e-13:
        return OrderEstimate(None, True, (d1, d2))
    return OrderEstimate(math.log2(d1 / d2), False, (d1, d2))
