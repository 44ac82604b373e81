"""Built-in systems: hand-written vector fields, DSL twins and candidates.

Each entry produces the raw scenario dictionary for its defaults, the
compiled (hand-written) vector field, the same field written in the
expression language, and a Lyapunov candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .derivator import Derivator
from .gcalc import TwoBranchScalar
from .lyapunov import ClassK, LyapunovCandidate
from .solver import VectorField


@dataclass(frozen=True)
class Builtin:
    id: str
    description: str
    dimension: int
    defaults: dict
    scenario: Callable[[dict], dict]
    field: Callable[[dict], VectorField]
    dsl: Callable[[dict], tuple[list[str], list[str] | None]]
    candidate: Callable[[dict, Derivator, float], LyapunovCandidate] | None = None


def _with_programs(vf: VectorField, p: dict, dsl) -> VectorField:
    """Attach the DSL programs so the compiled kernel can take over."""
    cont, jump = dsl(p)
    twin = VectorField.from_exprs(cont, jump, p)
    vf.programs = twin.programs
    vf.jump_programs = twin.jump_programs
    vf.source = ("builtin",) + twin.source
    return vf


def _unit_jump_derivator(first: float = 1.0) -> dict:
    return {
        "pieces": [{"start": 0.0, "end": math.inf, "kind": "linear", "slope": 1.0}],
        "jumps": {"kind": "periodic", "period": 1.0, "offsets": [0.0], "gaps": [1.0], "origin": first},
    }


def _quadratic(a_src: str = "s^2", b_src: str | None = "s^2", rate_src: str | None = "s^2", constants=None):
    a = ClassK.from_expr(a_src, constants)
    b = ClassK.from_expr(b_src, constants) if b_src else None
    rate = ClassK.from_expr(rate_src, constants) if rate_src else None
    return a, b, rate


# -- linear system with unit jumps on the naturals ------------------------------

def _linear_scenario(p):
    return {
        "name": "linear_jumps",
        "derivator": _unit_jump_derivator(),
        "domain": {"t0": 0.0, "horizon": 20.0, "center": [0.0]},
        "initial": {"states": [[1.0], [-0.5]]},
        "stability": {"t0_grid": [0.0, 5.0], "horizons": [2.0 ** k for k in range(1, 9)],
                      "eps": [0.5], "rays": [[1.0], [-1.0]]},
    }


def _linear_field(p):
    c, nu = p["c"], p["nu"]
    return VectorField(1, lambda t, x: (c * x[0],), lambda t, x: (nu * x[0],))


def _linear_dsl(p):
    return ["c*x1"], ["nu*x1"]


def _linear_candidate(p, d, r):
    c, nu = p["c"], p["nu"]
    a, b, rate = _quadratic()
    w = TwoBranchScalar.const(max(-2.0 * c, 0.0), max(1.0 - (1.0 + nu) ** 2, 0.0))
    return LyapunovCandidate(lambda t, x: x[0] * x[0], lambda t, x: (2.0 * x[0],), a, b, rate, w,
                             source={"V": "x1^2"})


# -- arctan system with decaying impulse gains ----------------------------------

def _arctan_scenario(p):
    return {
        "name": "arctan_impulse",
        "derivator": _unit_jump_derivator(),
        "domain": {"t0": 0.0, "horizon": 20.0, "center": [0.0]},
        "initial": {"states": [[0.5], [-0.5], [1.0], [-1.0]]},
        "stability": {"t0_grid": [0.0, 3.0, 10.0], "horizons": [2.0 ** k for k in range(1, 8)],
                      "eps": [0.5], "rays": [[1.0], [-1.0]]},
    }


def _arctan_gain(kappa: float, t: float) -> float:
    return math.expm1(kappa / (t * t))


def _arctan_field(p):
    kappa = p["kappa"]
    return VectorField(1, lambda t, x: (-t * math.atan(x[0]),),
                       lambda t, x: (_arctan_gain(kappa, t) * x[0],))


def _arctan_dsl(p):
    return ["-t*atan(x1)"], ["(exp(kappa/t^2)-1)*x1"]


def _arctan_candidate(p, d, r):
    kappa = p["kappa"]
    partial = [0.0]  # partial[k] = sum_{i <= k} 1/i^2, grown on demand

    def weight_factor(t):
        # prod_{i <= k} (1 + nu_i)^-2 with k the number of jumps strictly before t
        k = d.count_jumps(0.0, t) if t > 0 else 0
        while len(partial) <= k:
            i = len(partial)
            partial.append(partial[-1] + 1.0 / (i * i))
        return math.exp(-2.0 * kappa * partial[k])

    def V(t, x):
        return x[0] * x[0] * weight_factor(t)

    def grad(t, x):
        return (2.0 * x[0] * weight_factor(t),)

    def dvdt_jump(t, x):
        return x[0] * x[0] * weight_factor(t) * (math.exp(-2.0 * kappa / (t * t)) - 1.0)

    a0 = math.exp(-kappa * math.pi ** 2 / 3.0)
    a = ClassK(lambda s: a0 * s * s, f"{a0!r}*s^2")
    b = ClassK(lambda s: s * s, "s^2")
    rate = ClassK(lambda s: s * s / (1.0 + s * s), "s^2/(1+s^2)")
    w = TwoBranchScalar(lambda t: 2.0 * t * weight_factor(t), lambda t: 0.0)
    return LyapunovCandidate(V, grad, a, b, rate, w, None, dvdt_jump, source={"V": "x1^2 * prod (1+nu_i)^-2"})


# -- rational decay with infinitely many sign-flipping jumps --------------------

def _rational_scenario(p):
    return {
        "name": "rational_decay",
        "derivator": _unit_jump_derivator(),
        "domain": {"t0": 0.0, "horizon": 20.0, "center": [0.0]},
        "initial": {"states": [[1.0], [-1.0]]},
        "stability": {"t0_grid": [0.0, 3.0, 10.0], "horizons": [2.0 ** k for k in range(1, 9)],
                      "eps": [0.5], "rays": [[1.0], [-1.0]]},
    }


def _rational_field(p):
    nu = p["nu"]
    return VectorField(1, lambda t, x: (-x[0] * t / (1.0 + t * t),), lambda t, x: (nu * x[0],))


def _rational_dsl(p):
    return ["-x1*t/(1+t^2)"], ["nu*x1"]


def _rational_candidate(p, d, r):
    nu = p["nu"]
    s2 = (1.0 + nu) ** 2
    a = ClassK(lambda s: s * s, "s^2")
    b = ClassK(lambda s: s * s / s2, "s^2/(1+nu)^2")
    rate = ClassK(lambda s: s * s, "s^2")
    w = TwoBranchScalar(lambda t: 2.0 * t / (1.0 + t * t), lambda t: -nu * (2.0 + nu))
    return LyapunovCandidate(lambda t, x: x[0] * x[0], lambda t, x: (2.0 * x[0],), a, b, rate, w,
                             source={"V": "x1^2"})


# -- the same field with a single jump at t = 1 ---------------------------------

def _single_scenario(p):
    return {
        "name": "rational_single_jump",
        "derivator": {
            "pieces": [{"start": 0.0, "end": math.inf, "kind": "linear", "slope": 1.0}],
            "jumps": {"kind": "list", "events": [[1.0, 1.0]]},
        },
        "domain": {"t0": 0.0, "horizon": 20.0, "center": [0.0], "r0": 10.0},
        "initial": {"states": [[1.0], [-1.0]]},
        "stability": {"t0_grid": [0.0, 2.0, 5.0], "horizons": [2.0 ** k for k in range(1, 11)],
                      "eps": [0.5], "rays": [[1.0], [-1.0]]},
    }


def _single_candidate(p, d, r):
    nu = p["nu"]
    s2 = (1.0 + nu) ** 2

    def scale(t):
        return 1.0 if t <= 1.0 else 1.0 / s2

    w_after = 1.0 / s2
    a = ClassK(lambda s: min(s * s, s * s / s2), "min(s^2, s^2/(1+nu)^2)")
    b = ClassK(lambda s: max(s * s, s * s / s2), "max(s^2, s^2/(1+nu)^2)")
    rate = ClassK(lambda s: s * s, "s^2")
    w = TwoBranchScalar(lambda t: 2.0 * t / (1.0 + t * t) * (1.0 if t < 1.0 else w_after), lambda t: 0.0)
    return LyapunovCandidate(
        lambda t, x: x[0] * x[0] * scale(t),
        lambda t, x: (2.0 * x[0] * scale(t),),
        a, b, rate, w, None,
        lambda t, x: (1.0 / s2 - 1.0) * x[0] * x[0] if t == 1.0 else 0.0,
        source={"V": "x1^2 for t <= 1, x1^2/(1+nu)^2 after"},
    )


# -- Allee population hit by hourly trains --------------------------------------

def _allee_scenario(p):
    m = int(p["trains_per_day"])
    offsets = [24.0 * i / m for i in range(m)]
    return {
        "name": "allee_train",
        "derivator": {
            "pieces": [{"start": 0.0, "end": math.inf, "kind": "linear", "slope": 1.0}],
            "jumps": {"kind": "periodic", "period": 24.0, "offsets": offsets, "gaps": [1.0] * m, "origin": 0.0},
        },
        "domain": {"t0": 0.0, "horizon": 300.0, "center": [0.0], "r0": 50.0, "r": 46.0},
        "outputs": {"record_every": 10},
        "initial": {"states": [[10.0], [30.0], [45.0]]},
        "stability": {"t0_grid": [0.0, 0.5, 100.0], "horizons": [2.0 ** k for k in range(3, 12)],
                      "eps": [0.5, 5.0], "rays": [[1.0], [-1.0]]},
    }


def _allee_field(p):
    rho, K, M, dd = p["rho"], p["K"], p["M"], p["d"]
    return VectorField(1, lambda t, x: (rho * x[0] * (1.0 - x[0] / K) * (x[0] / M - 1.0),),
                       lambda t, x: (-dd * x[0],))


def _allee_dsl(p):
    return ["rho*x1*(1-x1/K)*(x1/M-1)"], ["-d*x1"]


def _allee_candidate(p, d, r):
    rho, K, M, dd = p["rho"], p["K"], p["M"], p["d"]
    # (1 - x/K)(1 - x/M) is smallest at |x| = r on the admissible ball
    a, b, rate = _quadratic()
    w = TwoBranchScalar.const(2.0 * rho * (1.0 - r / K) * (1.0 - r / M), 2.0 * dd - dd * dd)
    return LyapunovCandidate(lambda t, x: x[0] * x[0], lambda t, x: (2.0 * x[0],), a, b, rate, w,
                             source={"V": "x1^2"})


# -- cyanobacteria and ammonia under a day/night derivator ----------------------

def _cyano_scenario(p):
    K, alpha, beta = p["K"], p["alpha"], p["beta"]
    return {
        "name": "cyanobacteria",
        "derivator": {
            "pieces": [
                {"start": 0.0, "end": 1.0, "kind": "smooth",
                 "value": "(sin(pi*(t-0.5))+1)/2", "derivative": "pi/2*cos(pi*(t-0.5))"},
                {"start": 1.0, "end": 2.0, "kind": "plateau"},
            ],
            "period": 2.0,
        },
        "domain": {"t0": 0.0, "horizon": 200.0, "center": [K, alpha / beta], "r0": 1.0},
        "outputs": {"record_every": 10},
        "initial": {"states": [[9.5, 0.12], [10.5, 0.08]]},
        "stability": {"t0_grid": [0.0, 0.5, 3.0], "horizons": [2.0 ** k for k in range(2, 11)],
                      "eps": [0.6], "rays": [[-0.5, 0.02], [0.5, -0.02]]},
    }


def _cyano_field(p):
    rho, K, alpha, beta = p["rho"], p["K"], p["alpha"], p["beta"]
    return VectorField(2, lambda t, x: (rho * x[1] * x[0] * (1.0 - x[0] / K), alpha * x[0] - beta * x[1] * x[0]))


def _cyano_dsl(p):
    return ["rho*x2*x1*(1-x1/K)", "alpha*x1-beta*x2*x1"], None


def _cyano_candidate(p, d, r):
    K, alpha, beta = p["K"], p["alpha"], p["beta"]
    a0 = alpha / beta
    a = ClassK(lambda s: s * s, "s^2")
    b = ClassK(lambda s: 2.0 * s * s, "2*s^2")
    rate = ClassK(lambda s: 0.1 * s * s, "0.1*s^2")
    return LyapunovCandidate(
        lambda t, x: (x[0] - K) ** 2 + (x[1] - a0) ** 2,
        lambda t, x: (2.0 * (x[0] - K), 2.0 * (x[1] - a0)),
        a, b, rate, TwoBranchScalar.const(1.0),
        source={"V": "(x1-K)^2 + (x2-alpha/beta)^2"},
    )


# -- linear flow frozen after t = 1 ---------------------------------------------

def _plateau_scenario(p):
    return {
        "name": "plateau_linear",
        "derivator": {
            "pieces": [
                {"start": 0.0, "end": 1.0, "kind": "linear", "slope": 1.0},
                {"start": 1.0, "end": math.inf, "kind": "plateau"},
            ],
        },
        "domain": {"t0": 0.0, "horizon": 20.0, "center": [0.0]},
        "initial": {"states": [[1.0], [-0.5]]},
        "stability": {"t0_grid": [0.0, 0.5], "horizons": [2.0 ** k for k in range(0, 7)],
                      "eps": [0.05, 0.5], "rays": [[1.0], [-1.0]]},
    }


def _plateau_field(p):
    c = p["c"]
    return VectorField(1, lambda t, x: (c * x[0],))


def _plateau_dsl(p):
    return ["c*x1"], None


def _plateau_candidate(p, d, r):
    a, b, rate = _quadratic()
    w = TwoBranchScalar.const(max(-2.0 * p["c"], 0.0))
    return LyapunovCandidate(lambda t, x: x[0] * x[0], lambda t, x: (2.0 * x[0],), a, b, rate, w,
                             source={"V": "x1^2"})


BUILTINS: dict[str, Builtin] = {
    b.id: b
    for b in (
        Builtin("linear_jumps", "x' = c x off jumps, nu x at unit jumps on the naturals",
                1, {"c": -0.4, "nu": -0.5}, _linear_scenario, _linear_field, _linear_dsl, _linear_candidate),
        Builtin("arctan_impulse", "x' = -t atan(x) with impulse gains exp(kappa/k^2) - 1",
                1, {"kappa": 2.0}, _arctan_scenario, _arctan_field, _arctan_dsl, _arctan_candidate),
        Builtin("rational_decay", "x' = -x t/(1+t^2) with gain nu at every natural",
                1, {"nu": -1.5}, _rational_scenario, _rational_field, _rational_dsl, _rational_candidate),
        Builtin("rational_single_jump", "x' = -x t/(1+t^2) with a single jump nu x at t = 1",
                1, {"nu": 0.5}, _single_scenario, _rational_field, _rational_dsl, _single_candidate),
        Builtin("allee_train", "Allee population with a death fraction d at every train passage",
                1, {"rho": 0.001, "K": 100.0, "M": 50.0, "d": 0.03, "trains_per_day": 24.0},
                _allee_scenario, _allee_field, _allee_dsl, _allee_candidate),
        Builtin("cyanobacteria", "biomass/ammonia model growing only in daylight",
                2, {"rho": 1.0, "K": 10.0, "alpha": 0.001, "beta": 0.01},
                _cyano_scenario, _cyano_field, _cyano_dsl, _cyano_candidate),
        Builtin("plateau_linear", "x' = c x against g(t) = min(t, 1)",
                1, {"c": -2.0}, _plateau_scenario, _plateau_field, _plateau_dsl, _plateau_candidate),
    )
}


def builtin_field(bid: str, params: dict) -> VectorField:
    b = BUILTINS[bid]
    return _with_programs(b.field(params), params, b.dsl)


def builtin_dsl_field(bid: str, params: dict) -> VectorField:
    """The builtin written purely in the expression language."""
    cont, jump = BUILTINS[bid].dsl(params)
    return VectorField.from_exprs(cont, jump, params)
