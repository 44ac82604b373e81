"""Opcodes and checked scalar primitives for the expression language.

The tree evaluator, the generated Python closures and the compiled VM in
``_kernels.pyx`` all follow the error rules encoded here, so every backend
returns bit-identical values or raises on the same inputs.
"""

from __future__ import annotations

import math

from .errors import EvaluationError

# Stack machine opcodes; each instruction is an (op, arg) pair.
CONST = 0
TIME = 1
STATE = 2
ADD = 3
SUB = 4
MUL = 5
DIV = 6
POW = 7
NEG = 8
SIN = 9
COS = 10
EXP = 11
LOG = 12
SQRT = 13
ATAN = 14
ABS = 15
MIN = 16
MAX = 17

BINARY_OPS = {"+": ADD, "-": SUB, "*": MUL, "/": DIV, "^": POW}
FUNCTIONS = {
    "sin": (SIN, 1),
    "cos": (COS, 1),
    "exp": (EXP, 1),
    "log": (LOG, 1),
    "sqrt": (SQRT, 1),
    "atan": (ATAN, 1),
    "abs": (ABS, 1),
    "min": (MIN, 2),
    "max": (MAX, 2),
}


def c_div(a: float, b: float) -> float:
    if b == 0.0:
        raise EvaluationError("division by zero", "/")
    return a / b


def c_pow(a: float, b: float) -> float:
    try:
        return math.pow(a, b)
    except (ValueError, OverflowError):
        raise EvaluationError(f"invalid power {a!r}^{b!r}", "^") from None


def c_exp(a: float) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        raise EvaluationError(f"exp overflow at {a!r}", "exp") from None


def c_log(a: float) -> float:
    if a <= 0.0:
        raise EvaluationError(f"log of non-positive argument {a!r}", "log")
    return math.log(a)


def c_sqrt(a: float) -> float:
    if a < 0.0:
        raise EvaluationError(f"sqrt of negative argument {a!r}", "sqrt")
    return math.sqrt(a)


def c_sin(a: float) -> float:
    if math.isinf(a):
        raise EvaluationError("sin of infinity", "sin")
    return math.sin(a)


def c_cos(a: float) -> float:
    if math.isinf(a):
        raise EvaluationError("cos of infinity", "cos")
    return math.cos(a)


def c_min(a: float, b: float) -> float:
    return a if a <= b else b


def c_max(a: float, b: float) -> float:
    return a if a >= b else b


CHECKED = {
    "sin": c_sin,
    "cos": c_cos,
    "exp": c_exp,
    "log": c_log,
    "sqrt": c_sqrt,
    "atan": math.atan,
    "abs": math.fabs,
    "min": c_min,
    "max": c_max,
}

OPCODE_NAMES = {code: name for name, (code, _) in FUNCTIONS.items()}

# Namespace handed to generated closures.
CODEGEN_NAMESPACE = {
    "_div": c_div,
    "_pow": c_pow,
    **{f"_{name}": fn for name, fn in CHECKED.items()},
    "__builtins__": {},
}


def program_source(code, consts) -> str:
    """Rebuild a Python expression string from a postfix program."""
    stack: list[str] = []
    pairs = list(code)
    for i in range(0, len(pairs), 2):
        op, arg = pairs[i], pairs[i + 1]
        if op == CONST:
            stack.append(repr(float(consts[arg])))
        elif op == TIME:
            stack.append("t")
        elif op == STATE:
            stack.append(f"x[{arg}]")
        elif op == NEG:
            stack.append(f"(-{stack.pop()})")
        elif op in (ADD, SUB, MUL):
            b, a = stack.pop(), stack.pop()
            sym = {ADD: "+", SUB: "-", MUL: "*"}[op]
            stack.append(f"({a} {sym} {b})")
        elif op == DIV:
            b, a = stack.pop(), stack.pop()
            stack.append(f"_div({a}, {b})")
        elif op == POW:
            b, a = stack.pop(), stack.pop()
            stack.append(f"_pow({a}, {b})")
        elif op in (MIN, MAX):
            b, a = stack.pop(), stack.pop()
            stack.append(f"_{OPCODE_NAMES[op]}({a}, {b})")
        elif op in OPCODE_NAMES:
            stack.append(f"_{OPCODE_NAMES[op]}({stack.pop()})")
        else:
            raise ValueError(f"unknown opcode {op}")
    if len(stack) != 1:
        raise ValueError("malformed program")
    return stack[0]


def program_callable(code, consts):
    """Compile a postfix program to a Python function ``f(t, x) -> float``."""
    src = f"lambda t, x: {program_source(code, consts)}"
    return eval(src, dict(CODEGEN_NAMESPACE))  # noqa: S307 - source is generated from opcodes
