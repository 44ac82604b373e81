# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled smooth-segment integrator with a stack VM for DSL programs.

Mirrors ``_pykernels`` operation for operation; see that module for the
contract of ``rk4_program`` and ``eval_program``.
"""

import numpy as np

from libc.math cimport sin, cos, exp, log, sqrt, atan, fabs, pow, isnan, isinf, isfinite
from libc.stdlib cimport malloc, free

from .errors import EvaluationError

DEF CONST = 0
DEF TIME = 1
DEF STATE = 2
DEF ADD = 3
DEF SUB = 4
DEF MUL = 5
DEF DIV = 6
DEF POW = 7
DEF NEG = 8
DEF SIN = 9
DEF COS = 10
DEF EXP = 11
DEF LOG = 12
DEF SQRT = 13
DEF ATAN = 14
DEF ABS = 15
DEF MIN = 16
DEF MAX = 17
DEF S_OK = 0
DEF S_BLOWUP = 1
DEF S_EXIT = 2

OK = 0
BLOWUP = 1
EXIT = 2

_ERRORS = {
    1: "division by zero",
    2: "invalid power",
    3: "exp overflow",
    4: "log of non-positive argument",
    5: "sqrt of negative argument",
    6: "sin/cos of infinity",
    7: "malformed program",
}


cdef int vm_eval(const int* code, int ncode, const double* consts, double t,
                 const double* x, double* stack, double* out) noexcept nogil:
    cdef int sp = 0
    cdef int i, op, arg
    cdef double a, b, r
    for i in range(0, ncode, 2):
        op = code[i]
        arg = code[i + 1]
        if op == CONST:
            stack[sp] = consts[arg]
            sp += 1
        elif op == TIME:
            stack[sp] = t
            sp += 1
        elif op == STATE:
            stack[sp] = x[arg]
            sp += 1
        elif op == NEG:
            stack[sp - 1] = -stack[sp - 1]
        elif op == ADD or op == SUB or op == MUL or op == DIV or op == POW or op == MIN or op == MAX:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == ADD:
                r = a + b
            elif op == SUB:
                r = a - b
            elif op == MUL:
                r = a * b
            elif op == DIV:
                if b == 0.0:
                    return 1
                r = a / b
            elif op == POW:
                r = pow(a, b)
                if isnan(r) and not isnan(a) and not isnan(b):
                    return 2
                if isinf(r) and isfinite(a) and isfinite(b):
                    return 2
            elif op == MIN:
                r = a if a <= b else b
            else:
                r = a if a >= b else b
            stack[sp - 1] = r
        else:
            a = stack[sp - 1]
            if op == SIN:
                if isinf(a):
                    return 6
                r = sin(a)
            elif op == COS:
                if isinf(a):
                    return 6
                r = cos(a)
            elif op == EXP:
                r = exp(a)
                if isinf(r) and isfinite(a):
                    return 3
            elif op == LOG:
                if a <= 0.0:
                    return 4
                r = log(a)
            elif op == SQRT:
                if a < 0.0:
                    return 5
                r = sqrt(a)
            elif op == ATAN:
                r = atan(a)
            elif op == ABS:
                r = fabs(a)
            else:
                return 7
            stack[sp - 1] = r
    out[0] = stack[0]
    return 0


cdef class _Program:
    """Concatenated postfix code for one or more scalar expressions."""
    cdef int* code
    cdef double* consts
    cdef int* starts
    cdef int* const_starts
    cdef int count
    cdef int depth

    def __cinit__(self, programs):
        cdef int total = 0, ctotal = 0, i, j, k
        self.count = len(programs)
        for code, consts in programs:
            total += len(code)
            ctotal += len(consts)
        self.code = <int*> malloc(max(total, 1) * sizeof(int))
        self.consts = <double*> malloc(max(ctotal, 1) * sizeof(double))
        self.starts = <int*> malloc((self.count + 1) * sizeof(int))
        self.const_starts = <int*> malloc((self.count + 1) * sizeof(int))
        if not self.code or not self.consts or not self.starts or not self.const_starts:
            raise MemoryError()
        j = 0
        k = 0
        self.depth = 1
        for i, (code, consts) in enumerate(programs):
            self.starts[i] = j
            self.const_starts[i] = k
            depth = 0
            for pos in range(0, len(code), 2):
                op = code[pos]
                if op in (CONST, TIME, STATE):
                    depth += 1
                elif op in (ADD, SUB, MUL, DIV, POW, MIN, MAX):
                    depth -= 1
                self.depth = max(self.depth, depth)
            for v in code:
                self.code[j] = v
                j += 1
            for v in consts:
                self.consts[k] = v
                k += 1
        self.starts[self.count] = j
        self.const_starts[self.count] = k

    def __dealloc__(self):
        free(self.code)
        free(self.consts)
        free(self.starts)
        free(self.const_starts)

    cdef inline int run(self, int i, double t, const double* x, double* stack, double* out) noexcept nogil:
        return vm_eval(self.code + self.starts[i], self.starts[i + 1] - self.starts[i],
                       self.consts + self.const_starts[i], t, x, stack, out)


def eval_program(code, consts, t, x):
    cdef _Program prog = _Program([(list(code), list(consts))])
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=float) if len(x) else np.zeros(1)
    cdef double* stack = <double*> malloc(prog.depth * sizeof(double) + 8)
    cdef double out = 0.0
    cdef int err
    err = prog.run(0, t, &xv[0], stack, &out)
    free(stack)
    if err:
        raise EvaluationError(_ERRORS.get(err, "evaluation error"), float(t))
    return out


def rk4_program(programs, slope_program, double slope_shift, double t_a, double t_b, x0,
                double h, center, double r0, double blowup, long every=1):
    cdef _Program field = _Program(programs)
    cdef _Program slope = _Program([slope_program])
    cdef int n = field.count
    cdef int j, err = 0, status = S_OK
    cdef long i = 0, rec = 0
    cdef double t = t_a, t_next, dt, hh, th, dt6, s1, s2, s4, v
    cdef double tol = 1e-9 * h
    cdef bint const_slope = len(slope_program[0]) == 2 and slope_program[0][0] == CONST
    cdef double slope_value = float(slope_program[1][slope_program[0][1]]) if const_slope else 0.0
    cdef double err_time = 0.0
    cdef long cap = <long>((t_b - t_a) / h) // every + 3

    cdef double[::1] x = np.array(x0, dtype=float)
    cdef double[::1] c = np.array(center, dtype=float)
    cdef double[::1] y = np.zeros(n)
    cdef double[::1] k1 = np.zeros(n)
    cdef double[::1] k2 = np.zeros(n)
    cdef double[::1] k3 = np.zeros(n)
    cdef double[::1] k4 = np.zeros(n)
    cdef double[::1] dummy = np.zeros(1)
    cdef int sdepth = max(field.depth, slope.depth) + 2
    cdef double[::1] stack = np.zeros(sdepth)
    times_arr = np.empty(cap)
    states_arr = np.empty((cap, n))
    cdef double[::1] times = times_arr
    cdef double[:, ::1] states = states_arr

    with nogil:
        while t < t_b:
            t_next = t_a + (i + 1) * h
            if t_next >= t_b - tol:
                t_next = t_b
            dt = t_next - t
            hh = 0.5 * dt
            th = t + hh
            if const_slope:
                s1 = slope_value
                s2 = slope_value
                s4 = slope_value
            else:
                err = slope.run(0, t - slope_shift, &dummy[0], &stack[0], &s1)
                if not err:
                    err = slope.run(0, th - slope_shift, &dummy[0], &stack[0], &s2)
                if not err:
                    err = slope.run(0, t_next - slope_shift, &dummy[0], &stack[0], &s4)
                if err:
                    err_time = t
                    break
            for j in range(n):
                err = field.run(j, t, &x[0], &stack[0], &k1[j])
                if err:
                    break
                k1[j] = k1[j] * s1
            if err:
                err_time = t
                break
            for j in range(n):
                y[j] = x[j] + hh * k1[j]
            for j in range(n):
                err = field.run(j, th, &y[0], &stack[0], &k2[j])
                if err:
                    break
                k2[j] = k2[j] * s2
            if err:
                err_time = th
                break
            for j in range(n):
                y[j] = x[j] + hh * k2[j]
            for j in range(n):
                err = field.run(j, th, &y[0], &stack[0], &k3[j])
                if err:
                    break
                k3[j] = k3[j] * s2
            if err:
                err_time = th
                break
            for j in range(n):
                y[j] = x[j] + dt * k3[j]
            for j in range(n):
                err = field.run(j, t_next, &y[0], &stack[0], &k4[j])
                if err:
                    break
                k4[j] = k4[j] * s4
            if err:
                err_time = t_next
                break
            dt6 = dt / 6.0
            for j in range(n):
                x[j] = x[j] + dt6 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            i += 1
            t = t_next
            for j in range(n):
                v = x[j]
                if not isfinite(v) or fabs(v) > blowup:
                    status = S_BLOWUP
                    break
            if status == S_OK:
                for j in range(n):
                    if fabs(x[j] - c[j]) > r0:
                        status = S_EXIT
                        break
            if status != S_OK or t == t_b or i % every == 0:
                if rec < cap:
                    times[rec] = t
                    for j in range(n):
                        states[rec, j] = x[j]
                    rec += 1
            if status != S_OK:
                break
    if err:
        raise EvaluationError(f"{_ERRORS.get(err, 'evaluation error')} near t={err_time!r}", err_time)
    return times_arr[:rec].copy(), states_arr[:rec].copy(), status
