"""Empirical tail behaviour of trajectories and checks against certified bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bounds import BoundsReport
from .errors import GridMismatch, HorizonTooShort, NotCertified
from .integrator import Trajectory
from .model import HistorySpec

DEFAULT_TAIL_FRACTION = 0.25
RELATIVE_TOL = 1e-2
ABSOLUTE_TOL_FLOOR = 1e-6


@dataclass(frozen=True)
class TailEstimate:
    liminf_est: float
    limsup_est: float
    stability_gap: float
    tail_start: float

    def to_dict(self):
        return {"liminf": self.liminf_est, "limsup": self.limsup_est,
                "stability_gap": self.stability_gap, "tail_start": self.tail_start}


def _window(traj: Trajectory, start: float) -> np.ndarray:
    mask = traj.t >= start - 1e-12 * max(1.0, traj.T)
    return traj.x[mask]


def tail_extrema(traj: Trajectory, tail_fraction: float = DEFAULT_TAIL_FRACTION,
                 nested: bool = True) -> TailEstimate:
    """Min and max of the recorded values on the last ``tail_fraction`` of [0, T].

    With ``nested`` the same extrema are taken on the last half of that
    window. ``stability_gap`` is the largest change between the two; a
    large gap means the transient has not died out.
    """
    if not 0.0 < tail_fraction < 1.0:
        raise ValueError("tail_fraction must lie in (0, 1)")
    T = traj.T
    if T < 10.0 * traj.tau_max:
        raise HorizonTooShort(f"T = {T} < 10*tau_max = {10 * traj.tau_max}")
    start = T * (1.0 - tail_fraction)
    vals = _window(traj, start)
    lo, hi = float(vals.min()), float(vals.max())
    gap = 0.0
    if nested:
        inner = _window(traj, T * (1.0 - tail_fraction / 2.0))
        gap = max(abs(float(inner.min()) - lo), abs(float(inner.max()) - hi))
    return TailEstimate(lo, hi, gap, start)


@dataclass(frozen=True)
class SandwichVerdict:
    passed: bool
    max_violation: float
    at_time: float | None

    def to_dict(self):
        return {"pass": self.passed, "max_violation": self.max_violation,
                "at_time": self.at_time}


def verify_sandwich(x: Trajectory, lower: Trajectory, upper: Trajectory,
                    tol: float = 1e-6) -> SandwichVerdict:
    """Check ``lower - tol <= x <= upper + tol`` at every shared node."""
    for other in (lower, upper):
        if other.t.shape != x.t.shape or not np.array_equal(other.t, x.t):
            raise GridMismatch("trajectories do not share a grid")
    below = lower.x - x.x
    above = x.x - upper.x
    worst = np.maximum(below, above)
    i = int(np.argmax(worst))
    violation = max(0.0, float(worst[i]))
    return SandwichVerdict(violation <= tol, violation, float(x.t[i]) if violation > 0 else None)


@dataclass(frozen=True)
class PermanenceVerdict:
    passed: bool
    tails: tuple
    margins: tuple  # (liminf - lower bound, upper bound - limsup) per trajectory
    worst_margin: float
    tol: float

    def to_dict(self):
        return {
            "pass": self.passed,
            "worst_margin": self.worst_margin,
            "tol": self.tol,
            "per_trajectory": [
                {"liminf": t.liminf_est, "limsup": t.limsup_est,
                 "stability_gap": t.stability_gap, "margins": list(m)}
                for t, m in zip(self.tails, self.margins)
            ],
        }


def default_tolerance(lo: float, hi: float) -> float:
    width = hi - lo if math.isfinite(hi) else 0.0
    return max(RELATIVE_TOL * width, ABSOLUTE_TOL_FLOOR)


def verify_permanence(trajs: Sequence[Trajectory], report: BoundsReport,
                      tol: float | None = None,
                      tail_fraction: float = DEFAULT_TAIL_FRACTION) -> PermanenceVerdict:
    """Every tail estimate must sit inside the certified interval, up to ``tol``.

    ``tol`` defaults to 1% of the interval width with a floor of 1e-6.
    """
    if not report.permanent:
        raise NotCertified("report does not certify permanence")
    lo, hi = report.certified
    tol = default_tolerance(lo, hi) if tol is None else float(tol)
    tails, margins = [], []
    for traj in trajs:
        est = tail_extrema(traj, tail_fraction)
        tails.append(est)
        margins.append((est.liminf_est - lo, hi - est.limsup_est))
    worst = min(min(m) for m in margins) if margins else math.inf
    return PermanenceVerdict(bool(worst >= -tol), tuple(tails), tuple(margins), worst, tol)


def verify_gas(trajs: Sequence[Trajectory], K: float, tol: float) -> bool:
    """True iff each trajectory ends within ``tol`` of ``K`` and its last
    quarter oscillates by at most ``tol``."""
    for traj in trajs:
        if abs(float(traj.x[-1]) - K) > tol:
            return False
        tail = _window(traj, 0.75 * traj.T)
        if float(tail.max() - tail.min()) > tol:
            return False
    return True


def random_histories(n: int, seed: int, tau_max: float, scale: float = 1.0,
                     n_knots: int = 65) -> list:
    """``n`` admissible histories drawn from one 64-bit seed.

    ``SeedSequence(seed).spawn(n)`` gives one independent stream per member,
    so member ``i`` does not depend on ``n``. Each level is log-uniform on
    ``[0.1, 10] * scale``. Odd members carry a sinusoidal perturbation,
    clipped at zero and tabulated on ``n_knots`` points, with
    ``phi(0) > 0`` enforced.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    scale = scale if scale > 0 and math.isfinite(scale) else 1.0
    out = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n)):
        rng = np.random.default_rng(child)
        level = scale * 10.0 ** rng.uniform(-1.0, 1.0)
        amp = level * rng.uniform(0.0, 1.5)
        omega = rng.uniform(0.5, 6.0) / max(tau_max, 1e-12)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        if i % 2 == 0:
            out.append(HistorySpec.constant(level))
            continue
        thetas = np.linspace(-tau_max, 0.0, n_knots)
        vals = np.clip(level + amp * np.sin(omega * thetas + phase), 0.0, None)
        if vals[-1] <= 0.0:
            vals[-1] = 0.1 * level
        out.append(HistorySpec.tabulated(zip(thetas.tolist(), vals.tolist())))
    return out
