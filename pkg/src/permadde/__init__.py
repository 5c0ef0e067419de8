"""Simulation and permanence certification for scalar delayed population models."""

__version__ = "0.1.0"

from .model import (DelayTerm, HistorySpec, ModelSpec, MortalityTerm,  # noqa: E402
                    RecruitmentTerm, TimeFunction, Violation, admissible,
                    eval_rhs, validate_model)
from .presets import PRESETS, preset  # noqa: E402
from .integrator import (OrderEstimate, SolverConfig, Trajectory, integrate,  # noqa: E402
                         integrate_many, sample_trajectory, self_convergence_order)
from .bounds import (BoundsReport, EnvelopePair, bounds_report, build_envelopes,  # noqa: E402
                     check_condition, check_hypotheses, closed_form_bounds,
                     equilibrium_bounds, infer_family, positive_root)
from .asymptotics import (PermanenceVerdict, SandwichVerdict, TailEstimate,  # noqa: E402
                          random_histories, tail_extrema, verify_gas,
                          verify_permanence, verify_sandwich)

__all__ = [
    "DelayTerm", "HistorySpec", "ModelSpec", "MortalityTerm", "RecruitmentTerm",
    "TimeFunction", "Violation", "admissible", "eval_rhs", "validate_model",
    "PRESETS", "preset",
    "OrderEstimate", "SolverConfig", "Trajectory", "integrate", "integrate_many",
    "sample_trajectory", "self_convergence_order",
    "BoundsReport", "EnvelopePair", "bounds_report", "build_envelopes",
    "check_condition", "check_hypotheses", "closed_form_bounds", "equilibrium_bounds",
    "infer_family", "positive_root",
    "PermanenceVerdict", "SandwichVerdict", "TailEstimate", "random_histories",
    "tail_extrema", "verify_gas", "verify_permanence", "verify_sandwich",
]
