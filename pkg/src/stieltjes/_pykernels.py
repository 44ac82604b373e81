"""Pure-Python smooth-segment integrator; the fallback for ``_kernels``.

Both modules expose ``rk4_program`` and ``eval_program`` with identical
signatures and arithmetic order, so switching backends changes speed only.
"""

from __future__ import annotations

import math

import numpy as np

from . import _ops
from .errors import EvaluationError

OK = 0
BLOWUP = 1
EXIT = 2


def rk4_callable(f, slope, t_a, t_b, x0, h, center, r0, blowup, every=1):
    """Classical RK4 for dx/dt = f(t, x) * slope(t) on [t_a, t_b].

    Steps land on ``t_a + i*h``; the last one is shortened to end exactly at
    ``t_b``. Returns ``(times, states, status)`` for the recorded step
    endpoints; recording happens every ``every`` steps, at ``t_b`` and at the
    step that triggered a stop.
    """
    n = len(x0)
    x = [float(v) for v in x0]
    c = [float(v) for v in center]
    times = []
    states = []
    status = OK
    i = 0
    t = t_a
    tol = 1e-9 * h
    while t < t_b:
        t_next = t_a + (i + 1) * h
        if t_next >= t_b - tol:
            t_next = t_b
        dt = t_next - t
        hh = 0.5 * dt
        th = t + hh
        s1 = slope(t)
        s2 = slope(th)
        s4 = slope(t_next)
        f1 = f(t, x)
        k1 = [f1[j] * s1 for j in range(n)]
        y = [x[j] + hh * k1[j] for j in range(n)]
        f2 = f(th, y)
        k2 = [f2[j] * s2 for j in range(n)]
        y = [x[j] + hh * k2[j] for j in range(n)]
        f3 = f(th, y)
        k3 = [f3[j] * s2 for j in range(n)]
        y = [x[j] + dt * k3[j] for j in range(n)]
        f4 = f(t_next, y)
        dt6 = dt / 6.0
        x = [x[j] + dt6 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + f4[j] * s4) for j in range(n)]
        i += 1
        t = t_next
        for j in range(n):
            v = x[j]
            if not math.isfinite(v) or abs(v) > blowup:
                status = BLOWUP
                break
        if status == OK:
            for j in range(n):
                if abs(x[j] - c[j]) > r0:
                    status = EXIT
                    break
        if status != OK or t == t_b or i % every == 0:
            times.append(t)
            states.append(x)
        if status != OK:
            break
    return np.asarray(times, dtype=float), np.asarray(states, dtype=float).reshape(len(times), n), status


def _vector_callable(programs):
    body = ", ".join(_ops.program_source(code, consts) for code, consts in programs)
    return eval(f"lambda t, x: ({body},)", dict(_ops.CODEGEN_NAMESPACE))  # noqa: S307


def _slope_callable(slope_program, shift):
    code, consts = slope_program
    if len(code) == 2 and code[0] == _ops.CONST:
        value = float(consts[code[1]])
        return lambda t: value
    fn = _ops.program_callable(code, consts)
    return lambda t: fn(t - shift, ())


def rk4_program(programs, slope_program, slope_shift, t_a, t_b, x0, h, center, r0, blowup, every=1):
    """RK4 segment integration for a field given as postfix programs."""
    return rk4_callable(_vector_callable(programs), _slope_callable(slope_program, slope_shift),
                        t_a, t_b, x0, h, center, r0, blowup, every)


def eval_program(code, consts, t, x):
    return _ops.program_callable(code, consts)(float(t), [float(v) for v in x])


__all__ = ["rk4_callable", "rk4_program", "eval_program", "EvaluationError", "OK", "BLOWUP", "EXIT"]
