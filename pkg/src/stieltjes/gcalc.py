"""Lebesgue-Stieltjes quadrature, the g-exponential and the Gronwall bound."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .derivator import Derivator, Segment
from .errors import ArgumentError, EvaluationError, ResonanceError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TwoBranchScalar:
    """A scalar function of time with a separate value on the jump set D_g.

    ``constant`` is set by :meth:`const` and lets callers skip work when a
    branch is identically zero.
    """

    continuous: Callable[[float], float]
    jump: Callable[[float], float] | None = None
    constant: tuple[float, float] | None = None

    @classmethod
    def const(cls, value: float, at_jumps: float | None = None) -> "TwoBranchScalar":
        v = float(value)
        j = v if at_jumps is None else float(at_jumps)
        return cls(lambda t: v, lambda t: j, (v, j))

    def at_jump(self, t: float) -> float:
        return (self.jump or self.continuous)(t)

    @property
    def is_zero(self) -> bool:
        return self.constant == (0.0, 0.0)


@dataclass(frozen=True)
class QuadratureOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_depth: int = 40
    order: int = 10

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ArgumentError("rel_tol must be positive")


DEFAULT_OPTIONS = QuadratureOptions()
_RULES: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _rule(order: int):
    if order not in _RULES:
        _RULES[order] = np.polynomial.legendre.leggauss(order)
    return _RULES[order]


def _finite(value: float, t: float) -> float:
    if not math.isfinite(value):
        raise EvaluationError(f"integrand is not finite at t={t!r}", t)
    return value


def _gauss(fn, a: float, b: float, nodes, weights) -> float:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    total = 0.0
    for xi, wi in zip(nodes, weights):
        t = mid + half * xi
        total += wi * _finite(fn(t), t)
    return half * total


def adaptive_gauss(fn: Callable[[float], float], a: float, b: float,
                   opts: QuadratureOptions = DEFAULT_OPTIONS) -> float:
    """Adaptive composite Gauss-Legendre on [a, b] by panel bisection."""
    if a == b:
        return 0.0
    nodes, weights = _rule(opts.order)
    whole = _gauss(fn, a, b, nodes, weights)
    stack = [(a, b, whole, 0)]
    parts = []
    while stack:
        lo, hi, est, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = _gauss(fn, lo, mid, nodes, weights)
        right = _gauss(fn, mid, hi, nodes, weights)
        refined = left + right
        if abs(refined - est) <= max(opts.rel_tol * abs(refined), opts.abs_tol * (hi - lo)):
            parts.append(refined)
        elif depth >= opts.max_depth:
            logger.warning("quadrature depth limit reached on [%g, %g]", lo, hi)
            parts.append(refined)
        else:
            stack.append((mid, hi, right, depth + 1))
            stack.append((lo, mid, left, depth + 1))
    return math.fsum(parts)


def _segment_integral(seg: Segment, h: Callable[[float], float], opts) -> float:
    if seg.is_plateau:
        return 0.0
    return adaptive_gauss(lambda t: h(t) * seg.slope(t), seg.start, seg.end, opts)


def ls_integrate(d: Derivator, h: TwoBranchScalar, a: float, b: float,
                 opts: QuadratureOptions = DEFAULT_OPTIONS) -> float:
    """Integral of h over [a, b) against mu_g.

    Smooth sub-segments use adaptive Gauss-Legendre on h * g'; each jump
    t_k in [a, b) adds ``h.at_jump(t_k) * gap_k``. The jump at ``a`` is
    included and the jump at ``b`` is not.
    """
    if a > b:
        raise ArgumentError(f"integration needs a <= b, got [{a}, {b})")
    if a == b:
        return 0.0
    events = d.jumps_in(a, b)
    if h.constant is not None:
        # exact: constant times the continuous and the atomic parts of mu_g
        gaps = math.fsum(ev.gap for ev in events)
        cont = d.measure(a, b) - gaps
        return h.constant[0] * cont + h.constant[1] * gaps
    parts = [_segment_integral(seg, h.continuous, opts) for seg in d.segments(a, b)]
    for ev in events:
        parts.append(_finite(h.at_jump(ev.time), ev.time) * ev.gap)
    return math.fsum(parts)


def nonresonance_check(d: Derivator, p: TwoBranchScalar, a: float, b: float) -> list[float]:
    """Jump times in [a, b) where 1 + p(t) * gap(t) <= 0."""
    if a > b:
        raise ArgumentError(f"nonresonance check needs a <= b, got [{a}, {b})")
    return [ev.time for ev in d.jumps_in(a, b) if not 1.0 + p.at_jump(ev.time) * ev.gap > 0]


def _log_jump_factor(p: TwoBranchScalar, t: float, gap: float) -> float:
    factor = 1.0 + p.at_jump(t) * gap
    if not factor > 0:
        raise ResonanceError(t, factor)
    return math.log1p(p.at_jump(t) * gap)


def tilde(d: Derivator, p: TwoBranchScalar) -> TwoBranchScalar:
    """The exponent p~: p off D_g and log(1 + p*gap)/gap on D_g."""

    def on_jump(t: float) -> float:
        gap = d.jump_at(t)
        return _log_jump_factor(p, t, gap) / gap

    return TwoBranchScalar(p.continuous, on_jump)


def g_exp(d: Derivator, p: TwoBranchScalar, a: float, t: float,
          opts: QuadratureOptions = DEFAULT_OPTIONS) -> float:
    """e_p(t, a) = exp(integral of p~ over [a, t))."""
    if a > t:
        raise ArgumentError(f"g_exp needs a <= t, got a={a}, t={t}")
    bad = nonresonance_check(d, p, a, t)
    if bad:
        raise ResonanceError(bad[0], 1.0 + p.at_jump(bad[0]) * d.jump_at(bad[0]))
    return math.exp(ls_integrate(d, tilde(d, p), a, t, opts))


def log_g_exp_curve(d: Derivator, p: TwoBranchScalar, a: float, times: Sequence[float],
                    opts: QuadratureOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """log e_p(t, a) at each of the nondecreasing ``times`` (all >= a)."""
    out = np.empty(len(times))
    pt = tilde(d, p)
    acc = 0.0
    prev = a
    for i, t in enumerate(times):
        if t < prev:
            raise ArgumentError("times must be nondecreasing and >= a")
        acc += ls_integrate(d, pt, prev, t, opts)
        out[i] = acc
        prev = t
    return out


def g_exp_curve(d: Derivator, p: TwoBranchScalar, a: float, times: Sequence[float],
                opts: QuadratureOptions = DEFAULT_OPTIONS) -> np.ndarray:
    return np.exp(log_g_exp_curve(d, p, a, times, opts))


def apriori_bound_curve(d: Derivator, k: TwoBranchScalar, p: TwoBranchScalar, u0: float,
                        t0: float, times: Sequence[float],
                        opts: QuadratureOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Gronwall bound e_p(t,t0) * (int_[t0,t) e_p(s,t0)^-1 k(s)/(1+p(s)gap(s)) dmu_g + u0).

    Evaluated at every entry of the nondecreasing ``times`` in one sweep.
    """
    out = np.empty(len(times))
    log_e = 0.0
    acc = 0.0
    prev = t0
    skip_k = k.is_zero
    for i, t in enumerate(times):
        if t < prev:
            raise ArgumentError("times must be nondecreasing and >= t0")
        if t > prev:
            events = {ev.time: ev.gap for ev in d.jumps_in(prev, t)}
            for seg in d.segments(prev, t):
                if seg.start in events:
                    gap = events[seg.start]
                    if not skip_k:
                        denom = 1.0 + p.at_jump(seg.start) * gap
                        acc += math.exp(-log_e) * k.at_jump(seg.start) / denom * gap
                    log_e += _log_jump_factor(p, seg.start, gap)
                if seg.is_plateau:
                    continue
                if not skip_k:
                    base = log_e
                    start = seg.start

                    def integrand(s, seg=seg, base=base, start=start):
                        inner = adaptive_gauss(lambda r: p.continuous(r) * seg.slope(r), start, s, opts)
                        return math.exp(-(base + inner)) * k.continuous(s) * seg.slope(s)

                    acc += adaptive_gauss(integrand, seg.start, seg.end, opts)
                log_e += adaptive_gauss(lambda r, seg=seg: p.continuous(r) * seg.slope(r),
                                        seg.start, seg.end, opts)
        out[i] = math.exp(log_e) * (acc + u0)
        prev = t
    return out


def apriori_bound(d: Derivator, k: TwoBranchScalar, p: TwoBranchScalar, u0: float,
                  t0: float, t: float, opts: QuadratureOptions = DEFAULT_OPTIONS) -> float:
    """Upper bound on ||x(t)|| for ||f(t,u)|| <= k(t) + p(t)||u||, ||x(t0)|| <= u0."""
    if t < t0:
        raise ArgumentError(f"apriori_bound needs t >= t0, got t0={t0}, t={t}")
    return float(apriori_bound_curve(d, k, p, u0, t0, [t], opts)[0])
