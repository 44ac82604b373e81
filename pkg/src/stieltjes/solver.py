"""Integration of Stieltjes initial value problems x'_g = f(t, x).

Between jumps the state follows dx/dt = f(t, x) * g'(t) with fixed-step RK4
in t; at each jump time it is updated exactly by ``x + gap * f(t, x)``; on
plateaus of g it stays frozen.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .derivator import Derivator, Linear, Segment, Smooth
from .errors import ArgumentError, ResonanceError

DEFAULT_STEP = 1e-3
DEFAULT_BLOWUP = 1e8

_CONST_ONE = ((0, 0), (1.0,))


class VectorField:
    """Right-hand side with an off-jump branch and an optional jump branch.

    Branches are callables ``f(t, x) -> sequence of floats`` taking ``x`` as a
    list. ``programs``/``jump_programs`` hold the DSL postfix form when the
    field came from expressions; the compiled kernel needs them.
    """

    def __init__(self, dimension: int, continuous: Callable, jump: Callable | None = None,
                 programs=None, jump_programs=None, source=None):
        if dimension < 1:
            raise ArgumentError("a vector field needs dimension >= 1")
        self.dimension = int(dimension)
        self.continuous = continuous
        self.jump = jump
        self.programs = programs
        self.jump_programs = jump_programs
        self.source = source

    @classmethod
    def from_exprs(cls, continuous: Sequence[str], jump: Sequence[str] | None = None,
                   constants=None) -> "VectorField":
        """Build from one expression per component over ``t, x1..xn``."""
        from . import _ops, exprdsl

        n = len(continuous)
        if jump is not None and len(jump) != n:
            raise ArgumentError(f"jump branch has {len(jump)} components, expected {n}")

        def compile_branch(srcs):
            progs = [exprdsl.to_program(exprdsl.parse(s, n, constants)) for s in srcs]
            body = ", ".join(_ops.program_source(c, k) for c, k in progs)
            fn = eval(f"lambda t, x: ({body},)", dict(_ops.CODEGEN_NAMESPACE))  # noqa: S307
            return fn, [(tuple(c), tuple(k)) for c, k in progs]

        fc, pc = compile_branch(continuous)
        fj, pj = compile_branch(jump) if jump is not None else (None, None)
        return cls(n, fc, fj, pc, pj, (tuple(continuous), None if jump is None else tuple(jump)))

    def __call__(self, t: float, x) -> list[float]:
        return list(self.continuous(t, list(x)))

    def at_jump(self, t: float, x) -> list[float]:
        return list((self.jump or self.continuous)(t, list(x)))

    def __repr__(self) -> str:
        return f"VectorField(dimension={self.dimension}, source={self.source!r})"


@dataclass(frozen=True)
class DomainSpec:
    """Working domain: time window and the sup-norm ball B(center, r0)."""

    t0: float
    horizon: float
    center: tuple[float, ...]
    r0: float = math.inf
    r: float | None = None
    blowup_threshold: float = DEFAULT_BLOWUP

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.r is None:
            object.__setattr__(self, "r", self.r0)
        if not self.t0 < self.horizon:
            raise ArgumentError(f"need t0 < horizon, got {self.t0} and {self.horizon}")
        if not 0 < self.r <= self.r0:
            raise ArgumentError(f"need 0 < r <= r0, got r={self.r}, r0={self.r0}")
        if not self.blowup_threshold > 0:
            raise ArgumentError("blowup threshold must be positive")

    def distance(self, x) -> float:
        return max((abs(float(v) - c) for v, c in zip(x, self.center)), default=0.0)


class Termination(enum.Enum):
    HORIZON = "Horizon"
    BLOW_UP = "BlowUp"
    DOMAIN_EXIT_CONTINUOUS = "DomainExitContinuous"
    DOMAIN_EXIT_JUMP = "DomainExitJump"


@dataclass
class Trajectory:
    """Samples ``(t, g(t), x(t), x(t+))`` plus the way the run ended.

    ``x_left`` and ``x_right`` differ only on rows flagged in ``is_jump``.
    """

    derivator: Derivator
    times: np.ndarray
    x_left: np.ndarray
    x_right: np.ndarray
    is_jump: np.ndarray
    termination: Termination
    omega: float
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.x_left.shape[1]

    def __len__(self) -> int:
        return len(self.times)

    @cached_property
    def g(self) -> np.ndarray:
        return np.array([self.derivator.eval(t) for t in self.times])

    @property
    def samples(self):
        for i in range(len(self.times)):
            yield float(self.times[i]), float(self.g[i]), self.x_left[i], self.x_right[i]

    @property
    def final_state(self) -> np.ndarray:
        """State after the last recorded sample (post-jump if it was a jump)."""
        return self.x_right[-1]

    def state_at(self, t: float, right: bool = False) -> np.ndarray:
        """Recorded state at an exact sample time."""
        i = int(np.searchsorted(self.times, t))
        if i >= len(self.times) or self.times[i] != t:
            raise ArgumentError(f"t={t!r} is not a sample time")
        return (self.x_right if right else self.x_left)[i]

    def summary(self) -> dict:
        out = {
            "termination": self.termination.value,
            "omega_estimate": self.omega,
            "samples": len(self.times),
            "jumps": int(self.is_jump.sum()),
            "dimension": self.dimension,
        }
        out.update(self.meta)
        return out

    def to_csv(self, path, extra: dict[str, np.ndarray] | None = None) -> None:
        n = self.dimension
        cols = ["t", "g"] + [f"x{i}" for i in range(1, n + 1)] + [f"x{i}_plus" for i in range(1, n + 1)]
        data = [self.times, self.g, *self.x_left.T, *self.x_right.T]
        for name, values in (extra or {}).items():
            cols.append(name)
            data.append(np.asarray(values, dtype=float))
        with open(path, "w", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            for row in zip(*data):
                fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")

    def write_summary(self, path) -> None:
        write_key_values(path, self.summary())


def write_key_values(path, items: dict) -> None:
    with open(path, "w") as fh:
        for key, value in items.items():
            if isinstance(value, float):
                value = format(value, ".17g")
            fh.write(f"{key}={value}\n")


def jump_map(d: Derivator, f: VectorField, t: float, x) -> np.ndarray:
    """x + gap(t) * f_jump(t, x) at a jump time t."""
    gap = d.jump_at(t)
    if not gap > 0:
        raise ArgumentError(f"t={t!r} is not a jump time")
    fx = f.at_jump(t, x)
    return np.array([float(xi) + gap * fi for xi, fi in zip(x, fx)])


def _segment_slope_program(seg: Segment):
    prof = seg.piece.profile
    if isinstance(prof, Linear):
        return ((0, 0), (float(prof.slope),))
    if isinstance(prof, Smooth):
        return prof.slope_program
    return None


def _pick_backend(name: str, f: VectorField):
    if name == "callable":
        return None
    if name not in ("auto", "native", "python"):
        raise ArgumentError(f"unknown backend {name!r}")
    if f.programs is None:
        if name == "native":
            raise ArgumentError("the native backend needs a DSL-defined vector field")
        return None
    return kernels.get(name)


def solve_ivp(d: Derivator, f: VectorField, dom: DomainSpec, x0, step: float = DEFAULT_STEP,
              record_every: int = 1, backend: str = "auto") -> Trajectory:
    """Integrate from ``(dom.t0, x0)`` up to ``dom.horizon`` or an earlier stop.

    ``record_every`` keeps every k-th step; jump times, segment ends and the
    final sample are always kept. ``backend`` picks the smooth-segment
    integrator: "auto", "native", "python" or "callable" (use the Python
    callables even when programs exist).
    """
    if not step > 0 or not math.isfinite(step):
        raise ArgumentError(f"step must be positive, got {step!r}")
    if record_every < 1:
        raise ArgumentError("record_every must be >= 1")
    x0 = [float(v) for v in x0]
    n = f.dimension
    if len(x0) != n or len(dom.center) != n:
        raise ArgumentError(f"dimension mismatch: field {n}, x0 {len(x0)}, center {len(dom.center)}")
    if not dom.distance(x0) < dom.r:
        raise ArgumentError(f"initial state {x0} is not within r={dom.r} of the center")
    kern = _pick_backend(backend, f)
    center = list(dom.center)
    big = dom.blowup_threshold

    times: list[np.ndarray] = [np.array([dom.t0])]
    lefts: list[np.ndarray] = [np.array([x0])]
    jump_rows: dict[int, np.ndarray] = {}
    count = 1
    status = Termination.HORIZON
    t = dom.t0
    x = x0

    def apply_jump(tj, xl):
        nonlocal status
        xr = jump_map(d, f, tj, xl)
        jump_rows[count - 1] = xr
        if not np.all(np.isfinite(xr)) or np.max(np.abs(xr)) > big:
            status = Termination.BLOW_UP
        elif dom.distance(xr) > dom.r0:
            status = Termination.DOMAIN_EXIT_JUMP
        return [float(v) for v in xr]

    if d.jump_at(t) > 0:
        x = apply_jump(t, x)

    if status is Termination.HORIZON:
        for seg in d.segments(dom.t0, dom.horizon):
            if seg.is_plateau:
                grid = seg.start + step * np.arange(1, math.ceil((seg.end - seg.start) / step) + 1)
                grid = grid[grid < seg.end - 1e-9 * step][record_every - 1::record_every]
                ts = np.append(grid, seg.end)
                xs = np.tile(np.array(x), (len(ts), 1))
                code = kernels.OK
            else:
                prog = _segment_slope_program(seg)
                if kern is not None and prog is not None:
                    ts, xs, code = kern.rk4_program(f.programs, prog, seg.shift, seg.start, seg.end, x,
                                                    step, center, dom.r0, big, record_every)
                else:
                    ts, xs, code = kernels.rk4_callable(f.continuous, seg.slope, seg.start, seg.end, x,
                                                        step, center, dom.r0, big, record_every)
            times.append(ts)
            lefts.append(xs)
            count += len(ts)
            t = float(ts[-1])
            x = [float(v) for v in xs[-1]]
            if code == kernels.BLOWUP:
                status = Termination.BLOW_UP
                break
            if code == kernels.EXIT:
                status = Termination.DOMAIN_EXIT_CONTINUOUS
                break
            if d.jump_at(seg.end) > 0:
                x = apply_jump(seg.end, x)
                if status is not Termination.HORIZON:
                    break

    all_t = np.concatenate(times)
    x_left = np.concatenate(lefts).reshape(len(all_t), n)
    x_right = x_left.copy()
    is_jump = np.zeros(len(all_t), dtype=bool)
    for i, xr in jump_rows.items():
        x_right[i] = xr
        is_jump[i] = True
    return Trajectory(d, all_t, x_left, x_right, is_jump, status, t,
                      {"step": step, "backend": "callable" if kern is None else kernels.name_of(kern)})


def linear_closed_form(d: Derivator, c: float, nu: float, t0: float, x0: float, t: float,
                       include_jump_at_t: bool = False) -> float:
    """x0 * e_p(t, t0) for p = c off jumps and nu on jumps.

    With constant p the exponent is exact: c times the continuous part of
    mu_g([t0, t)) plus log(1 + nu * gap) for every jump in [t0, t).
    """
    if t < t0:
        raise ArgumentError(f"need t >= t0, got t0={t0}, t={t}")
    end = math.nextafter(t, math.inf) if include_jump_at_t else t
    events = d.jumps_in(t0, end) if include_jump_at_t else d.jumps_in(t0, t)
    log_jumps = []
    gap_total = []
    for ev in events:
        factor = 1.0 + nu * ev.gap
        if not factor > 0:
            raise ResonanceError(ev.time, factor)
        log_jumps.append(math.log1p(nu * ev.gap))
        gap_total.append(ev.gap)
    cont = d.measure(t0, t) - math.fsum(g for ev, g in zip(events, gap_total) if ev.time < t)
    return x0 * math.exp(c * cont + math.fsum(log_jumps))


def linear_closed_form_curve(d: Derivator, c: float, nu: float, t0: float, x0: float,
                             times: Sequence[float], include_jump_at_t: bool = False) -> np.ndarray:
    """:func:`linear_closed_form` at many times, sharing the jump bookkeeping."""
    ts = np.asarray(times, dtype=float)
    if len(ts) == 0:
        return np.empty(0)
    if ts.min() < t0:
        raise ArgumentError(f"need t >= t0, got t0={t0}, t={ts.min()}")
    events = d.jumps_in(t0, math.nextafter(float(ts.max()), math.inf))
    ev_t = np.array([ev.time for ev in events])
    gaps = np.array([ev.gap for ev in events])
    factors = 1.0 + nu * gaps
    if np.any(~(factors > 0)):
        i = int(np.argmax(~(factors > 0)))
        raise ResonanceError(float(ev_t[i]), float(factors[i]))
    cum_log = np.concatenate([[0.0], np.cumsum(np.log1p(nu * gaps))])
    cum_gap = np.concatenate([[0.0], np.cumsum(gaps)])
    before = np.searchsorted(ev_t, ts, side="left")
    upto = np.searchsorted(ev_t, ts, side="right") if include_jump_at_t else before
    g0 = d.eval(t0)
    cont = np.array([d.eval(float(t)) for t in ts]) - g0 - cum_gap[before]
    return x0 * np.exp(c * cont + cum_log[upto])
