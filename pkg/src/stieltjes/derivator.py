"""Constructive representation of a left-continuous nondecreasing derivator g.

A :class:`Derivator` is built from continuous pieces that tile the working
window (optionally repeated with a period) and a jump rule listing the
discontinuity times and their gaps. The gap at ``t`` is never included in
``g(t)``; it only shows up in the right limit ``g(t+)``.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from .errors import ArgumentError, DomainError


@dataclass(frozen=True)
class Linear:
    slope: float


@dataclass(frozen=True)
class Plateau:
    pass


@dataclass(frozen=True)
class Smooth:
    """Nondecreasing smooth profile given by its value map and its exact slope.

    Both maps receive *local* time: the absolute time for non-periodic
    derivators, the time reduced into the base period otherwise. ``source``
    keeps the expression strings when the maps came from the DSL, and
    ``slope_program`` is the compiled postfix form used by the native kernel.
    """

    value: Callable[[float], float]
    slope: Callable[[float], float]
    source: tuple[str, str] | None = None
    slope_program: tuple | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_exprs(cls, value: str, slope: str, constants=None) -> "Smooth":
        from . import exprdsl

        v = exprdsl.parse(value, 0, constants)
        s = exprdsl.parse(slope, 0, constants)
        fv, fs = exprdsl.to_callable(v), exprdsl.to_callable(s)
        code, consts = exprdsl.to_program(s)
        return cls(lambda t: fv(t, ()), lambda t: fs(t, ()), (value, slope), (tuple(code), tuple(consts)))


Profile = Linear | Plateau | Smooth


@dataclass(frozen=True)
class ContinuousPiece:
    start: float
    end: float
    profile: Profile

    def increment(self, a: float, b: float) -> float:
        """g(b) - g(a) contributed by this piece for local times inside it."""
        p = self.profile
        if isinstance(p, Plateau):
            return 0.0
        if isinstance(p, Linear):
            return p.slope * (b - a)
        return p.value(b) - p.value(a)

    def slope_at(self, t: float) -> float:
        p = self.profile
        if isinstance(p, Plateau):
            return 0.0
        if isinstance(p, Linear):
            return p.slope
        return p.slope(t)


@dataclass(frozen=True)
class JumpList:
    events: tuple[tuple[float, float], ...]

    def __post_init__(self):
        events = tuple(sorted((float(t), float(g)) for t, g in self.events))
        for i, (t, g) in enumerate(events):
            if not g > 0:
                raise ArgumentError(f"jump gap at t={t} must be positive, got {g}")
            if i and events[i - 1][0] == t:
                raise ArgumentError(f"duplicate jump time {t}")
        object.__setattr__(self, "events", events)


@dataclass(frozen=True)
class PeriodicJumps:
    """Jumps at ``origin + offsets[i] + k * period`` for ``k = 0, 1, 2, ...``."""

    period: float
    offsets: tuple[float, ...]
    gaps: tuple[float, ...]
    origin: float = 0.0

    def __post_init__(self):
        if not self.period > 0:
            raise ArgumentError("jump period must be positive")
        offsets = tuple(float(o) for o in self.offsets)
        gaps = self.gaps
        if isinstance(gaps, (int, float)):
            gaps = (float(gaps),) * len(offsets)
        gaps = tuple(float(g) for g in gaps)
        if len(gaps) != len(offsets):
            raise ArgumentError("one gap per offset is required")
        if any(not g > 0 for g in gaps):
            raise ArgumentError("jump gaps must be positive")
        if any(not 0 <= o < self.period for o in offsets):
            raise ArgumentError("offsets must lie in [0, period)")
        if len(set(offsets)) != len(offsets):
            raise ArgumentError("duplicate offsets")
        order = sorted(range(len(offsets)), key=offsets.__getitem__)
        object.__setattr__(self, "offsets", tuple(offsets[i] for i in order))
        object.__setattr__(self, "gaps", tuple(gaps[i] for i in order))
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "origin", float(self.origin))

    def time(self, i: int, k: int) -> float:
        return self.origin + self.offsets[i] + k * self.period

    def count_before(self, i: int, t: float) -> int:
        """Number of k >= 0 with time(i, k) < t."""
        first = self.origin + self.offsets[i]
        if t <= first:
            return 0
        n = max(0, math.ceil((t - first) / self.period))
        while self.time(i, n) < t:
            n += 1
        while n > 0 and self.time(i, n - 1) >= t:
            n -= 1
        return n


JumpRule = JumpList | PeriodicJumps


class PointKind(enum.Enum):
    CONTINUITY = "ContinuityPoint"
    JUMP = "JumpPoint"
    PLATEAU_INTERIOR = "PlateauInterior"
    PLATEAU_ENDPOINT = "PlateauEndpoint"


@dataclass(frozen=True)
class JumpEvent:
    time: float
    gap: float


@dataclass(frozen=True)
class Segment:
    """Maximal sub-interval [start, end) of one piece with no interior jump.

    ``shift`` converts absolute to local time (``local = t - shift``).
    """

    start: float
    end: float
    piece: ContinuousPiece
    shift: float

    @property
    def is_plateau(self) -> bool:
        return isinstance(self.piece.profile, Plateau)

    def slope(self, t: float) -> float:
        return self.piece.slope_at(t - self.shift)


class Derivator:
    """Left-continuous nondecreasing g built from pieces and a jump rule.

    Parameters
    ----------
    pieces:
        Contiguous pieces. Without ``period`` they tile ``[pieces[0].start,
        pieces[-1].end)`` (the last end may be ``inf``); with ``period`` they
        tile one period and repeat forever.
    jumps:
        A :class:`JumpList`, a :class:`PeriodicJumps` or ``None``.
    anchor:
        Value of g at the window start.
    """

    def __init__(self, pieces: Sequence[ContinuousPiece], jumps: JumpRule | None = None,
                 anchor: float = 0.0, period: float | None = None):
        if not pieces:
            raise ArgumentError("a derivator needs at least one piece")
        norm = []
        for p in pieces:
            prof = p.profile
            if isinstance(prof, Linear):
                if prof.slope < 0:
                    raise ArgumentError("linear slope must be nonnegative")
                if prof.slope == 0:
                    prof = Plateau()
            if not p.start < p.end:
                raise ArgumentError(f"empty or reversed piece [{p.start}, {p.end})")
            norm.append(ContinuousPiece(float(p.start), float(p.end), prof))
        for a, b in zip(norm, norm[1:]):
            if a.end != b.start:
                raise ArgumentError(f"pieces must tile the window: gap or overlap at {a.end}/{b.start}")
        if period is not None:
            period = float(period)
            if not period > 0 or not math.isclose(norm[-1].end - norm[0].start, period, rel_tol=0, abs_tol=1e-12):
                raise ArgumentError("periodic pieces must tile exactly one period")
        self.pieces = tuple(norm)
        self.jumps = jumps
        self.anchor = float(anchor)
        self.period = period
        self.start = self.pieces[0].start
        self.end = math.inf if period is not None else self.pieces[-1].end
        self._starts = [p.start for p in self.pieces]
        cum = [0.0]
        for p in self.pieces:
            cum.append(cum[-1] + (p.increment(p.start, p.end) if math.isfinite(p.end) else 0.0))
        self._cum = cum
        self._period_inc = cum[-1] if period is not None else None
        if jumps is not None:
            lo = self._first_jump_time()
            if lo is not None and lo < self.start:
                raise ArgumentError("jump times must lie inside the window")
        if isinstance(jumps, JumpList):
            self._jt = [t for t, _ in jumps.events]
            acc = [0.0]
            for _, g in jumps.events:
                acc.append(acc[-1] + g)
            self._jcum = acc

    # -- construction helpers -------------------------------------------------
    @classmethod
    def identity(cls, start: float = 0.0) -> "Derivator":
        return cls([ContinuousPiece(start, math.inf, Linear(1.0))])

    @classmethod
    def unit_jumps(cls, first: float = 1.0, spacing: float = 1.0, gap: float = 1.0,
                   start: float = 0.0) -> "Derivator":
        """g(t) = t plus a jump of ``gap`` at first, first + spacing, ..."""
        return cls([ContinuousPiece(start, math.inf, Linear(1.0))],
                   PeriodicJumps(spacing, (0.0,), (gap,), origin=first))

    def _first_jump_time(self):
        j = self.jumps
        if isinstance(j, JumpList):
            return j.events[0][0] if j.events else None
        if isinstance(j, PeriodicJumps):
            return j.origin + j.offsets[0] if j.offsets else None
        return None

    # -- locating ---------------------------------------------------------------
    def _check(self, t: float) -> None:
        if not (self.start <= t <= self.end) or math.isnan(t):
            raise DomainError(f"t={t!r} outside the window [{self.start}, {self.end}]")

    def _reduce(self, t: float) -> tuple[int, float]:
        """Return (period index k, local time) with local in the base period."""
        if self.period is None:
            return 0, t
        k = math.floor((t - self.start) / self.period)
        loc = t - k * self.period
        if loc >= self.start + self.period:
            k += 1
            loc = t - k * self.period
        elif loc < self.start:
            k -= 1
            loc = t - k * self.period
        return k, loc

    def _piece_index(self, loc: float) -> int:
        i = bisect.bisect_right(self._starts, loc) - 1
        return min(max(i, 0), len(self.pieces) - 1)

    def _continuous_part(self, t: float) -> float:
        k, loc = self._reduce(t)
        i = self._piece_index(loc)
        p = self.pieces[i]
        base = self._cum[i] + p.increment(p.start, loc)
        if self.period is not None:
            base += k * self._period_inc
        return base

    def _jumps_before(self, t: float) -> float:
        j = self.jumps
        if j is None:
            return 0.0
        if isinstance(j, JumpList):
            return self._jcum[bisect.bisect_left(self._jt, t)]
        return math.fsum(g * j.count_before(i, t) for i, g in enumerate(j.gaps))

    # -- public queries -------------------------------------------------------------
    def eval(self, t: float) -> float:
        """g(t): anchor, continuous increments and gaps at jump times < t."""
        self._check(t)
        return self.anchor + self._continuous_part(t) + self._jumps_before(t)

    __call__ = eval

    def jump_at(self, t: float) -> float:
        self._check(t)
        j = self.jumps
        if j is None:
            return 0.0
        if isinstance(j, JumpList):
            i = bisect.bisect_left(self._jt, t)
            return j.events[i][1] if i < len(self._jt) and self._jt[i] == t else 0.0
        for i, g in enumerate(j.gaps):
            first = j.origin + j.offsets[i]
            if t < first:
                continue
            k = round((t - first) / j.period)
            if k >= 0 and j.time(i, k) == t:
                return g
        return 0.0

    def right_limit(self, t: float) -> float:
        return self.eval(t) + self.jump_at(t)

    def measure(self, a: float, b: float) -> float:
        """mu_g([a, b)) = g(b) - g(a)."""
        if a > b:
            raise ArgumentError(f"measure needs a <= b, got [{a}, {b})")
        if a == b:
            self._check(a)
            return 0.0
        return self.eval(b) - self.eval(a)

    def jumps_in(self, a: float, b: float) -> list[JumpEvent]:
        """Jump events with a <= t < b in increasing time order."""
        j = self.jumps
        if j is None or not a < b:
            return []
        if isinstance(j, JumpList):
            lo = bisect.bisect_left(self._jt, a)
            hi = bisect.bisect_left(self._jt, b)
            return [JumpEvent(t, g) for t, g in j.events[lo:hi]]
        out = []
        for i, g in enumerate(j.gaps):
            for k in range(j.count_before(i, a), j.count_before(i, b)):
                out.append(JumpEvent(j.time(i, k), g))
        out.sort(key=lambda e: e.time)
        return out

    def count_jumps(self, a: float, b: float) -> int:
        """Number of jump times in [a, b), without listing them."""
        j = self.jumps
        if j is None or not a < b:
            return 0
        if isinstance(j, JumpList):
            return bisect.bisect_left(self._jt, b) - bisect.bisect_left(self._jt, a)
        return sum(j.count_before(i, b) - j.count_before(i, a) for i in range(len(j.offsets)))

    def slope(self, t: float) -> float:
        """Right derivative of the continuous part at t (exact, from the piece)."""
        self._check(t)
        k, loc = self._reduce(t)
        return self.pieces[self._piece_index(loc)].slope_at(loc)

    def classify(self, t: float) -> PointKind:
        if self.jump_at(t) > 0:
            return PointKind.JUMP
        k, loc = self._reduce(t)
        i = self._piece_index(loc)
        p = self.pieces[i]
        if isinstance(p.profile, Plateau):
            return PointKind.PLATEAU_INTERIOR if loc > p.start else PointKind.PLATEAU_ENDPOINT
        # t sits at the start of a non-plateau piece: endpoint if the previous piece is flat.
        if loc == p.start:
            if i > 0:
                prev = self.pieces[i - 1]
            else:
                prev = self.pieces[-1] if self.period is not None and k > 0 else None
            if prev is not None and isinstance(prev.profile, Plateau):
                return PointKind.PLATEAU_ENDPOINT
        return PointKind.CONTINUITY

    def piece_boundaries(self, a: float, b: float) -> list[float]:
        """Piece boundaries strictly inside (a, b)."""
        out = []
        if self.period is None:
            for p in self.pieces[1:]:
                if a < p.start < b:
                    out.append(p.start)
            return out
        k0, _ = self._reduce(a)
        k = k0
        while True:
            shift = k * self.period
            if self.start + shift >= b:
                break
            for p in self.pieces:
                s = p.start + shift
                if a < s < b:
                    out.append(s)
            k += 1
        return out

    def segments(self, a: float, b: float) -> Iterator[Segment]:
        """Split [a, b) at piece boundaries and jump times."""
        if a > b:
            raise ArgumentError(f"segments needs a <= b, got [{a}, {b})")
        self._check(a)
        self._check(b)
        cuts = set(self.piece_boundaries(a, b))
        cuts.update(e.time for e in self.jumps_in(a, b) if e.time > a)
        points = [a, *sorted(cuts), b]
        for s, e in zip(points, points[1:]):
            if not s < e:
                continue
            k, loc = self._reduce(s)
            i = self._piece_index(loc)
            yield Segment(s, e, self.pieces[i], k * self.period if self.period is not None else 0.0)

    def largest_plateau(self) -> float:
        """Length of the longest plateau piece (inf if g is eventually constant)."""
        return max((p.end - p.start for p in self.pieces if isinstance(p.profile, Plateau)), default=0.0)

    def __repr__(self) -> str:
        return (f"Derivator(pieces={list(self.pieces)!r}, jumps={self.jumps!r}, "
                f"anchor={self.anchor!r}, period={self.period!r})")
