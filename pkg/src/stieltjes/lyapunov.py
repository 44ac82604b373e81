"""Lyapunov certificates for Stieltjes systems, checked on sampled evidence.

Every check works on simulated trajectories and finite (t, u) grids, so a
passing report means "no counterexample found on the samples", not a proof.
Norms are sup-norms measured from the equilibrium ``dom.center``.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .derivator import Derivator, PointKind
from .errors import ArgumentError, ConfigError
from .gcalc import TwoBranchScalar, ls_integrate
from .solver import DEFAULT_STEP, DomainSpec, Trajectory, VectorField, jump_map, solve_ivp, write_key_values

ABS_TOL = 1e-9
REL_TOL = 1e-6
DEFAULT_FAR_FACTORS = (1.0, 10.0, 100.0, 1000.0)


def _tol(scale: float) -> float:
    return ABS_TOL + REL_TOL * scale


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("STIELTJES_WORKERS", "1")))
    except ValueError:
        return 1


def ordered_map(fn, items, workers: int | None = None) -> list:
    """``list(map(fn, items))``, fanned out over threads when workers > 1."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class ClassK:
    """A scalar envelope s -> value on [0, inf)."""

    def __init__(self, fn: Callable[[float], float], source: str | None = None):
        self.fn = fn
        self.source = source

    @classmethod
    def from_expr(cls, src: str, constants=None) -> "ClassK":
        from . import exprdsl

        e = exprdsl.parse(src, constants=constants, variables={"s": 0})
        fn = exprdsl.to_callable(e)
        return cls(lambda s: fn(s, ()), src)

    def __call__(self, s: float) -> float:
        return float(self.fn(float(s)))

    def check(self, upper: float, points: int = 1001, positive_definite_only: bool = False):
        """Validate on a grid of [0, upper]; returns ``(ok, worst_margin, witness)``.

        Class K needs value 0 at 0 and strict increase. With
        ``positive_definite_only`` only 0 at 0 and positivity elsewhere are checked.
        """
        grid = np.linspace(0.0, upper, points)
        vals = np.array([self(s) for s in grid])
        worst, witness = abs(vals[0]), 0.0
        if not positive_definite_only:
            drops = vals[:-1] - vals[1:]
            i = int(np.argmax(drops))
            if drops[i] >= 0 and drops[i] + ABS_TOL > worst:
                worst, witness = float(drops[i]) + ABS_TOL, float(grid[i + 1])
        neg = -vals[1:]
        j = int(np.argmax(neg))
        if neg[j] >= 0 and neg[j] + ABS_TOL > worst:
            worst, witness = float(neg[j]) + ABS_TOL, float(grid[j + 1])
        return worst <= ABS_TOL, worst, witness

    def __repr__(self) -> str:
        return f"ClassK({self.source or self.fn!r})"


@dataclass
class LyapunovCandidate:
    """V together with the comparison functions a certificate needs.

    ``dvdt`` is the partial g-derivative of V in t off the jump set and
    ``dvdt_jump`` its jump quotient ``[V(t+, x) - V(t, x)] / gap``; both
    default to zero (time-independent V).
    """

    V: Callable[[float, Sequence[float]], float]
    grad: Callable[[float, Sequence[float]], Sequence[float]] | None
    a: ClassK
    b: ClassK | None = None
    rate: ClassK | None = None
    weight: TwoBranchScalar | None = None
    dvdt: Callable[[float, Sequence[float]], float] | None = None
    dvdt_jump: Callable[[float, Sequence[float]], float] | None = None
    source: dict = field(default_factory=dict)

    def value(self, t: float, x) -> float:
        return float(self.V(t, list(x)))

    def value_right(self, d: Derivator, t: float, x) -> float:
        """V(t+, x)."""
        v = self.value(t, x)
        if self.dvdt_jump is None:
            return v
        return v + d.jump_at(t) * float(self.dvdt_jump(t, list(x)))


FD_STEP = 1e-6


def central_difference_gradient(V, dimension: int, h: float = FD_STEP):
    """State gradient of ``V(t, x)`` by central differences with step ``h * max(1, |x_i|)``.

    Only a fallback for candidates given without an explicit gradient;
    reports built from it say so in their sampling metadata.
    """

    def grad(t, x):
        x = [float(v) for v in x]
        out = []
        for i in range(dimension):
            hi = h * max(1.0, abs(x[i]))
            up, dn = list(x), list(x)
            up[i] += hi
            dn[i] -= hi
            out.append((float(V(t, up)) - float(V(t, dn))) / (up[i] - dn[i]))
        return out

    return grad


def _terms(d: Derivator, f: VectorField, cand: LyapunovCandidate, t: float, x,
           gap: float | None = None, check_plateau: bool = True):
    """Return (V'_g, scale) where scale sizes the comparison tolerance."""
    if cand.grad is None:
        raise ConfigError("the Lyapunov candidate has no state gradient", "candidate.grad")
    if gap is None:
        gap = d.jump_at(t)
    x = [float(v) for v in x]
    if gap > 0:
        xr = jump_map(d, f, t, x)
        vr = cand.value_right(d, t, xr)
        vl = cand.value(t, x)
        return (vr - vl) / gap, (abs(vr) + abs(vl)) / gap
    if check_plateau and d.classify(t) is PointKind.PLATEAU_INTERIOR:
        raise ArgumentError(f"V'_g is not defined inside a plateau of g (t={t!r})")
    fx = f(t, x)
    gx = cand.grad(t, x)
    prods = [float(gi) * float(fi) for gi, fi in zip(gx, fx)]
    dt = float(cand.dvdt(t, x)) if cand.dvdt is not None else 0.0
    return dt + math.fsum(prods), abs(dt) + sum(abs(p) for p in prods)


def v_dot_along(d: Derivator, f: VectorField, cand: LyapunovCandidate, t: float, x) -> float:
    """Total g-derivative of V along solutions through (t, x)."""
    return _terms(d, f, cand, t, x)[0]


class Verdict(enum.Enum):
    STABLE = "Stable"
    UNIFORMLY_STABLE = "UniformlyStable"
    ASYMPTOTICALLY_STABLE = "AsymptoticallyStable"
    UNIFORMLY_ASYMPTOTICALLY_STABLE = "UniformlyAsymptoticallyStable"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class Condition:
    id: str
    passed: bool
    worst_margin: float
    witness: object = None


@dataclass
class CertificateReport:
    verdict: Verdict
    conditions: list[Condition]
    sampling: dict = field(default_factory=dict)

    def condition(self, cid: str) -> Condition:
        for c in self.conditions:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def passed(self, cid: str) -> bool:
        return any(c.id == cid and c.passed for c in self.conditions)

    def to_text(self) -> str:
        lines = [f"verdict: {self.verdict.value} (certified on sampled evidence)", ""]
        w = max([len(c.id) for c in self.conditions] + [9])
        lines.append(f"{'condition':<{w}}  result  {'worst margin':>14}  witness")
        for c in self.conditions:
            res = "pass" if c.passed else "FAIL"
            lines.append(f"{c.id:<{w}}  {res:<6}  {c.worst_margin:>14.6g}  {_fmt_witness(c.witness)}")
        if self.sampling:
            lines.append("")
            lines.extend(f"{k}: {v}" for k, v in self.sampling.items())
        return "\n".join(lines)

    def to_key_values(self) -> dict:
        out = {"verdict": self.verdict.value}
        for c in self.conditions:
            out[f"{c.id}.passed"] = str(c.passed).lower()
            out[f"{c.id}.worst_margin"] = float(c.worst_margin)
            if c.witness is not None:
                out[f"{c.id}.witness"] = _fmt_witness(c.witness)
        for k, v in self.sampling.items():
            out[f"sampling.{k}"] = v
        return out

    def write(self, path) -> None:
        write_key_values(path, self.to_key_values())


def _fmt_witness(w) -> str:
    if w is None:
        return "-"
    if isinstance(w, (tuple, list, np.ndarray)):
        return "(" + ", ".join(_fmt_witness(v) for v in w) + ")"
    if isinstance(w, (float, np.floating)):
        return format(float(w), ".10g")
    return str(w)


class _Worst:
    """Running maximum of (margin - tolerance) with its witness."""

    def __init__(self, cid: str):
        self.cid = cid
        self.margin = -math.inf
        self.excess = -math.inf
        self.witness = None

    def add(self, margin: float, tol: float, witness) -> None:
        if not math.isfinite(margin):
            margin = math.inf
        if margin - tol > self.excess:
            self.excess = margin - tol
            self.margin = margin
            self.witness = witness

    def result(self) -> Condition:
        if self.witness is None:
            return Condition(self.cid, True, 0.0, None)
        return Condition(self.cid, self.excess <= 0, float(self.margin), self.witness)


def _simulate(d, f, dom, grid, step, workers, record_every=1, backend="auto") -> list[Trajectory]:
    def run(item):
        t0, x0 = item
        sub = DomainSpec(t0, dom.horizon, dom.center, dom.r0, dom.r, dom.blowup_threshold)
        return solve_ivp(d, f, sub, x0, step, record_every=record_every, backend=backend)

    return ordered_map(run, grid, workers)


def _norm(x, center) -> float:
    return float(np.max(np.abs(np.asarray(x, dtype=float) - center))) if len(center) else 0.0


def _directions(n: int) -> list[np.ndarray]:
    dirs = []
    for i in range(n):
        for s in (1.0, -1.0):
            e = np.zeros(n)
            e[i] = s
            dirs.append(e)
    if 1 < n <= 4:
        for mask in range(2 ** n):
            dirs.append(np.array([1.0 if mask >> k & 1 else -1.0 for k in range(n)]))
    return dirs


def _state_radius(dom: DomainSpec, grid) -> float:
    if math.isfinite(dom.r0):
        return dom.r0
    c = np.asarray(dom.center)
    return 2.0 * max((_norm(x0, c) for _, x0 in grid), default=1.0)


def _time_grid(d: Derivator, lo: float, hi: float, points: int) -> list[float]:
    ts = set(np.linspace(lo, hi, points).tolist())
    ts.update(ev.time for ev in d.jumps_in(lo, hi)[:200])
    return sorted(ts)


def _decay_conditions(d, f, dom, cand, grid, trajs, t_points, u_points, check_rate):
    c = np.asarray(dom.center)
    n = len(c)
    t_lo = min(t0 for t0, _ in grid)
    ts = _time_grid(d, t_lo, dom.horizon, t_points)
    radius = _state_radius(dom, grid)
    conds = []

    zero = _Worst("zero-section")
    for t in ts:
        v = cand.value(t, c)
        zero.add(abs(v), ABS_TOL, (t,))
    conds.append(zero.result())

    ok, m, wit = cand.a.check(radius)
    conds.append(Condition("class-K:a", ok, m, wit))
    if cand.b is not None:
        ok, m, wit = cand.b.check(radius)
        conds.append(Condition("class-K:b", ok, m, wit))
        ab = _Worst("a<=b")
        for s in np.linspace(0.0, radius, 1001):
            av, bv = cand.a(s), cand.b(s)
            ab.add(av - bv, _tol(abs(av) + abs(bv)), (float(s),))
        conds.append(ab.result())

    lower = _Worst("sandwich:lower")
    upper = _Worst("sandwich:upper") if cand.b is not None else None

    def sandwich(t, x):
        s = _norm(x, c)
        v = cand.value(t, x)
        av = cand.a(s)
        lower.add(av - v, _tol(abs(av) + abs(v)), (t, *map(float, x)))
        if upper is not None:
            bv = cand.b(s)
            upper.add(v - bv, _tol(abs(bv) + abs(v)), (t, *map(float, x)))

    radii = np.linspace(0.0, radius, u_points + 1)[1:]
    dirs = _directions(n)
    for t in ts:
        for rr in radii:
            for e in dirs:
                sandwich(t, c + rr * e)
    # off-jump samples and jump quotients are reported separately
    decay = {False: _Worst("decay"), True: _Worst("decay:jump")}
    rate = {False: _Worst("rate"), True: _Worst("rate:jump")} if check_rate else None
    has_plateaus = d.largest_plateau() > 0
    for tr in trajs:
        for i, t in enumerate(tr.times):
            t = float(t)
            xl = tr.x_left[i]
            if not np.all(np.isfinite(xl)):
                continue
            sandwich(t, xl)
            jumped = bool(tr.is_jump[i])
            if jumped:
                sandwich(t, tr.x_right[i])
            elif has_plateaus and d.classify(t) is PointKind.PLATEAU_INTERIOR:
                continue
            vd, scale = _terms(d, f, cand, t, xl, d.jump_at(t) if jumped else 0.0, False)
            decay[jumped].add(vd, _tol(scale), (t, *map(float, xl)))
            if rate is not None:
                wv = cand.weight.at_jump(t) if jumped else cand.weight.continuous(t)
                bound = -wv * cand.rate(_norm(xl, c))
                rate[jumped].add(vd - bound, _tol(scale + abs(bound)), (t, *map(float, xl)))
    conds.append(lower.result())
    if upper is not None:
        conds.append(upper.result())
    conds.extend([decay[False].result(), decay[True].result()])
    if rate is not None:
        conds.extend([rate[False].result(), rate[True].result()])
    return conds


def _decay_verdict(conds: list[Condition], has_b: bool) -> Verdict:
    ok = {c.id: c.passed for c in conds}
    if not all(ok.get(k, False) for k in ("zero-section", "class-K:a", "sandwich:lower", "decay",
                                             "decay:jump")):
        return Verdict.INCONCLUSIVE
    if has_b and all(ok.get(k, False) for k in ("class-K:b", "a<=b", "sandwich:upper")):
        return Verdict.UNIFORMLY_STABLE
    return Verdict.STABLE


def check_decay_certificate(d: Derivator, f: VectorField, dom: DomainSpec, cand: LyapunovCandidate,
                            traj_grid, step: float = DEFAULT_STEP, t_points: int = 41,
                            u_points: int = 20, trajectories: list[Trajectory] | None = None,
                            workers: int | None = None, record_every: int = 10) -> CertificateReport:
    """Check the stability and uniform stability conditions.

    ``traj_grid`` is a list of ``(t0, x0)``; each pair is simulated up to
    ``dom.horizon`` unless ``trajectories`` are passed in; ``record_every``
    thins the checked samples (jump times are always checked).
    """
    grid = _validate_grid(dom, traj_grid)
    if cand.grad is None:
        raise ConfigError("the Lyapunov candidate has no state gradient", "candidate.grad")
    trajs = trajectories if trajectories is not None else _simulate(d, f, dom, grid, step, workers, record_every)
    conds = _decay_conditions(d, f, dom, cand, grid, trajs, t_points, u_points, check_rate=False)
    verdict = _decay_verdict(conds, cand.b is not None)
    return CertificateReport(verdict, conds, {
        "trajectories": len(trajs),
        "samples": sum(len(t) for t in trajs),
        "step": step,
        "record_every": record_every,
        "gradient": cand.source.get("grad", "supplied"),
        "t_grid_points": t_points,
        "u_grid_points": u_points,
    })


def _validate_grid(dom: DomainSpec, traj_grid):
    grid = [(float(t0), [float(v) for v in x0]) for t0, x0 in traj_grid]
    if not grid:
        raise ArgumentError("the trajectory grid is empty")
    for t0, x0 in grid:
        if dom.distance(x0) >= dom.r:
            raise ArgumentError(f"grid point x0={x0} is not within r={dom.r} of the center")
    return grid


def divergence_table(d: Derivator, w: TwoBranchScalar, starts: Sequence[float],
                     horizons: Sequence[float]) -> np.ndarray:
    """W[i, j] = integral of w over [starts[i], starts[i] + horizons[j])."""
    hs = sorted(float(h) for h in horizons)
    out = np.empty((len(starts), len(hs)))
    for i, t0 in enumerate(starts):
        acc = 0.0
        prev = 0.0
        for j, h in enumerate(hs):
            acc += ls_integrate(d, w, t0 + prev, t0 + h)
            out[i, j] = acc
            prev = h
    return out


def _tail_increasing(values, horizons, warmup: float) -> tuple[bool, int]:
    """Strict increase of values over the horizons beyond ``warmup``; returns (ok, index of first stall)."""
    idx = [j for j, h in enumerate(horizons) if h > warmup]
    if len(idx) < 2:
        idx = list(range(len(horizons)))[-2:]
    for a, b in zip(idx, idx[1:]):
        if not values[b] > values[a]:
            return False, b
    return True, -1


def check_asymptotic_certificate(d: Derivator, f: VectorField, dom: DomainSpec, cand: LyapunovCandidate,
                                 traj_grid, horizons: Sequence[float], t0_grid: Sequence[float] | None = None,
                                 step: float = DEFAULT_STEP, divergence_target: float | None = None,
                                 annulus_inner: float | None = None,
                                 far_factors: Sequence[float] = DEFAULT_FAR_FACTORS,
                                 t_points: int = 41, u_points: int = 20,
                                 trajectories: list[Trajectory] | None = None,
                                 workers: int | None = None, record_every: int = 10) -> CertificateReport:
    """Decay checks plus the rate bound V'_g <= -w phi and the divergence probes.

    The probes integrate w over ``[t0, t0 + T)`` for the doubling
    ``horizons`` T. The fixed-t0 probe needs every t0 in ``t0_grid`` to reach
    the divergence target with W still growing; the uniform probe takes, at
    each T, the minimum over ``t0_grid`` together with the far starts
    ``lam * T`` for ``lam`` in ``far_factors``.
    """
    if cand.rate is None or cand.weight is None:
        raise ConfigError("the asymptotic certificate needs a rate and a weight", "candidate")
    if not horizons:
        raise ArgumentError("horizons must not be empty")
    grid = _validate_grid(dom, traj_grid)
    if cand.grad is None:
        raise ConfigError("the Lyapunov candidate has no state gradient", "candidate.grad")
    trajs = trajectories if trajectories is not None else _simulate(d, f, dom, grid, step, workers, record_every)
    conds = _decay_conditions(d, f, dom, cand, grid, trajs, t_points, u_points, check_rate=True)
    c = np.asarray(dom.center)

    radius = _state_radius(dom, grid)
    ok, m, wit = cand.rate.check(radius, positive_definite_only=True)
    conds.insert(-2, Condition("rate:positive-definite", ok, m, wit))

    if annulus_inner is None:
        annulus_inner = dom.r0 / 2 if math.isfinite(dom.r0) else max(_norm(x0, c) for _, x0 in grid)
    upper = dom.r0 if math.isfinite(dom.r0) else annulus_inner
    lo = min(annulus_inner, upper)
    M = min(cand.rate(s) for s in np.linspace(lo, upper, 10_000))
    if divergence_target is None:
        vmax = max(cand.value(t0, x0) for t0, x0 in grid)
        divergence_target = 10.0 * vmax / M if M > 0 else math.inf

    hs = sorted(float(h) for h in horizons)
    t0s = sorted(set(float(t) for t in (t0_grid if t0_grid is not None else [t0 for t0, _ in grid])))
    warmup = d.largest_plateau()
    if not math.isfinite(warmup):
        warmup = 0.0
    table = divergence_table(d, cand.weight, t0s, hs)

    fixed = Condition("divergence:fixed-t0", True, -math.inf, None)
    for i, t0 in enumerate(t0s):
        grow, stall = _tail_increasing(table[i], hs, warmup)
        margin = divergence_target - table[i, -1]
        if margin > fixed.worst_margin or not grow:
            fixed.worst_margin = max(fixed.worst_margin, margin)
            fixed.witness = (t0, hs[stall] if not grow else hs[-1])
        if margin > 0 or not grow:
            fixed.passed = False

    far_table = {}
    for lam in far_factors:
        row = divergence_table(d, cand.weight, [lam * h for h in hs], hs)
        for j in range(len(hs)):
            far_table[(lam, j)] = row[j, j]
    mins, argmins = [], []
    for j in range(len(hs)):
        cands = [(table[i, j], t0s[i]) for i in range(len(t0s))]
        cands += [(far_table[(lam, j)], lam * hs[j]) for lam in far_factors]
        v, at = min(cands)
        mins.append(v)
        argmins.append(at)
    grow, stall = _tail_increasing(mins, hs, warmup)
    u_margin = divergence_target - mins[-1]
    uniform = Condition("divergence:uniform", u_margin <= 0 and grow, float(u_margin),
                        (argmins[stall], hs[stall]) if not grow else (argmins[-1], hs[-1]))
    conds.extend([fixed, uniform])

    verdict = _decay_verdict(conds, cand.b is not None)
    passed = {cd.id: cd.passed for cd in conds}
    if verdict is Verdict.UNIFORMLY_STABLE and passed["rate"] and passed["rate:jump"] \
            and passed["rate:positive-definite"] \
            and passed["divergence:fixed-t0"]:
        verdict = Verdict.ASYMPTOTICALLY_STABLE
        if passed["divergence:uniform"]:
            verdict = Verdict.UNIFORMLY_ASYMPTOTICALLY_STABLE
    return CertificateReport(verdict, conds, {
        "trajectories": len(trajs),
        "samples": sum(len(t) for t in trajs),
        "step": step,
        "record_every": record_every,
        "gradient": cand.source.get("grad", "supplied"),
        "horizons": " ".join(format(h, "g") for h in hs),
        "t0_grid": " ".join(format(t, "g") for t in t0s),
        "far_factors": " ".join(format(v, "g") for v in far_factors),
        "divergence_target": divergence_target,
        "phi_min_on_annulus": M,
        "annulus": f"[{lo:g}, {upper:g}]",
        "W_min_by_horizon": " ".join(format(v, ".6g") for v in mins),
    })


@dataclass
class ProbeRow:
    eps: float
    t0: float
    delta: float
    delta_upper: float
    resolved: bool
    sigma: float | None


@dataclass
class ProbeTable:
    rows: list[ProbeRow]

    def spread(self) -> dict[float, dict]:
        """Per eps: min/max of delta and sigma across t0 (sigma None if any is missing)."""
        out = {}
        for eps in sorted({r.eps for r in self.rows}):
            rs = [r for r in self.rows if r.eps == eps]
            sig = [r.sigma for r in rs]
            out[eps] = {
                "delta_min": min(r.delta for r in rs),
                "delta_max": max(r.delta for r in rs),
                "sigma_min": None if None in sig else min(sig),
                "sigma_max": None if None in sig else max(sig),
            }
        return out

    def to_text(self) -> str:
        lines = [f"{'eps':>10} {'t0':>10} {'delta':>14} {'delta_hi':>14} {'sigma':>12}"]
        for r in self.rows:
            sig = "none" if r.sigma is None else format(r.sigma, ".6g")
            dl = format(r.delta, ".6g") if r.resolved else f"<{r.delta_upper:.6g}"
            lines.append(f"{r.eps:>10.6g} {r.t0:>10.6g} {dl:>14} {r.delta_upper:>14.6g} {sig:>12}")
        return "\n".join(lines)


def _max_dev(tr: Trajectory, c: np.ndarray) -> float:
    return max(float(np.max(np.abs(tr.x_left - c))), float(np.max(np.abs(tr.x_right - c))))


def _sigma(tr: Trajectory, c: np.ndarray, eps: float, t0: float, horizon: float) -> float | None:
    from .solver import Termination

    if tr.termination is not Termination.HORIZON:
        return None
    left = np.max(np.abs(tr.x_left - c), axis=1) >= eps
    right = np.max(np.abs(tr.x_right - c), axis=1) >= eps
    if left[-1] or right[-1]:
        return None
    last = 0.0
    for i in np.nonzero(left | right)[0]:
        at = float(tr.times[i + 1]) if right[i] else float(tr.times[i])
        last = max(last, at - t0)
    return last


def empirical_stability_probe(d: Derivator, f: VectorField, dom: DomainSpec, eps_list: Sequence[float],
                              t0_grid: Sequence[float], x0_rays, step: float = DEFAULT_STEP,
                              iterations: int = 12, workers: int | None = None) -> ProbeTable:
    """Estimate delta(eps, t0) by bisection on the initial radius and sigma(eps, t0).

    For delta each ray is normalized to a sup-norm direction and scaled by
    the radius being tested; for sigma the trajectory starts at
    ``center + ray`` and sigma is the elapsed time after which the state
    stays within eps up to the horizon (None if it never settles).
    """
    c = np.asarray(dom.center)
    rays = [np.asarray(r, dtype=float) for r in x0_rays]
    if not rays:
        raise ArgumentError("x0_rays must not be empty")
    dirs = []
    for r in rays:
        nr = float(np.max(np.abs(r)))
        if not nr > 0:
            raise ArgumentError("rays must be nonzero")
        dirs.append(r / nr)
    for eps in eps_list:
        if not 0 < eps <= dom.r0:
            raise ArgumentError(f"eps={eps} must lie in (0, r0]")

    def run(t0, x0):
        sub = DomainSpec(t0, dom.horizon, dom.center, dom.r0, dom.r, dom.blowup_threshold)
        return solve_ivp(d, f, sub, list(x0), step)

    def stays(t0, rho, eps):
        from .solver import Termination

        for u in dirs:
            tr = run(t0, c + rho * u)
            if tr.termination is not Termination.HORIZON or not _max_dev(tr, c) < eps:
                return False
        return True

    def task(item):
        eps, t0 = item
        hi = min(eps, math.nextafter(dom.r, 0.0))
        if stays(t0, hi, eps):
            lo, up, resolved = hi, hi, True
        else:
            lo, up = 0.0, hi
            for _ in range(iterations):
                mid = 0.5 * (lo + up)
                if stays(t0, mid, eps):
                    lo = mid
                else:
                    up = mid
            resolved = lo > 0
        sig = []
        for r in rays:
            x0 = c + r
            if dom.distance(x0) >= dom.r:
                sig.append(None)
                continue
            sig.append(_sigma(run(t0, x0), c, eps, t0, dom.horizon))
        sigma = None if None in sig else max(sig)
        return ProbeRow(float(eps), float(t0), lo, up, resolved, sigma)

    items = [(float(e), float(t)) for e in eps_list for t in t0_grid]
    return ProbeTable(ordered_map(task, items, workers))
