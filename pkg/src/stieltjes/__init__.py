"""Stieltjes differential equations: simulation and Lyapunov certificates.

The derivator ``g`` drives everything. Off its jumps and plateaus a solution
follows ``x' = f(t, x) g'(t)``, at a jump it is updated by
``x+ = x + gap * f(t, x)`` and on a plateau it stays frozen.
"""

from .derivator import (ContinuousPiece, Derivator, JumpEvent, JumpList, Linear, PeriodicJumps,
                        Plateau, PointKind, Segment, Smooth)
from .errors import (ArgumentError, ConfigError, DomainError, EvaluationError, ExprSyntaxError,
                     ResonanceError, StieltjesError)
from .gcalc import (TwoBranchScalar, QuadratureOptions, apriori_bound, apriori_bound_curve, g_exp,
                    g_exp_curve, ls_integrate, nonresonance_check, tilde)
from .kernels import BACKEND
from .lyapunov import (CertificateReport, ClassK, Condition, LyapunovCandidate, ProbeTable, Verdict,
                       check_asymptotic_certificate, check_decay_certificate,
                       empirical_stability_probe, v_dot_along)
from .scenarios import ScenarioConfig, list_scenarios, load_scenario, run_scenario
from .solver import (DomainSpec, Termination, Trajectory, VectorField, jump_map, linear_closed_form,
                     solve_ivp)

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "BACKEND", "CertificateReport", "ClassK", "Condition", "ConfigError",
    "ContinuousPiece", "Derivator", "DomainError", "DomainSpec", "EvaluationError",
    "ExprSyntaxError", "JumpEvent", "JumpList", "Linear", "LyapunovCandidate", "PeriodicJumps",
    "Plateau", "PointKind", "ProbeTable", "QuadratureOptions", "ResonanceError", "ScenarioConfig",
    "Segment", "Smooth", "StieltjesError", "Termination", "Trajectory", "TwoBranchScalar",
    "VectorField", "Verdict", "apriori_bound", "apriori_bound_curve", "check_asymptotic_certificate",
    "check_decay_certificate", "empirical_stability_probe", "g_exp", "g_exp_curve", "jump_map",
    "linear_closed_form", "list_scenarios", "load_scenario", "ls_integrate", "nonresonance_check",
    "run_scenario", "solve_ivp", "tilde", "v_dot_along",
]
