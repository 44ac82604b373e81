"""A small scalar expression language for scenario files.

Grammar (whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right-associative
    atom    := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names are ``t``, ``x1`` .. ``xn``, the constants ``pi`` and ``e``, any
caller-supplied named constants, and the functions sin, cos, exp, log,
sqrt, atan, abs (one argument) and min, max (two arguments).

Expressions compile to three interchangeable forms: a tree walk
(:func:`evaluate`), a generated Python closure (:func:`to_callable`) and a
postfix program for the compiled VM (:func:`to_program`).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

from . import _ops
from .errors import EvaluationError, ExprSyntaxError


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int  # 0 is time, i >= 1 is state component x_i


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]

BUILTIN_CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    pos = 0
    tokens = []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None:
            bad = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, variables: Mapping[str, int], constants: Mapping[str, float]):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = variables
        self.constants = constants

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, offset = self.take()
        if text != value or kind not in ("op",):
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", offset)

    def parse(self) -> Expr:
        node = self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", offset)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            operand = self.unary()
            if isinstance(operand, Num):
                return Num(-operand.value)
            return Neg(operand)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, text, offset = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                return self.call(text, offset)
            if text in self.variables:
                return Var(text, self.variables[text])
            if text in self.constants:
                return Num(float(self.constants[text]))
            if text in _ops.FUNCTIONS:
                raise ExprSyntaxError(f"function {text!r} needs arguments", offset)
            raise ExprSyntaxError(f"unknown identifier {text!r}", offset)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"expected a value, found {found}", offset)

    def call(self, name: str, offset: int) -> Expr:
        if name not in _ops.FUNCTIONS:
            raise ExprSyntaxError(f"unknown function {name!r}", offset)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        arity = _ops.FUNCTIONS[name][1]
        if len(args) != arity:
            raise ExprSyntaxError(f"{name} takes {arity} argument(s), got {len(args)}", offset)
        return Call(name, tuple(args))


def state_variables(dimension: int) -> dict[str, int]:
    names = {"t": 0}
    names.update({f"x{i}": i for i in range(1, dimension + 1)})
    return names


def parse(src: str, dimension: int = 0, constants: Mapping[str, float] | None = None,
          variables: Mapping[str, int] | None = None) -> Expr:
    """Parse ``src`` into an AST over ``t`` and ``x1..x{dimension}``.

    ``variables`` replaces the default name table entirely; it is how the
    class-K envelopes get their single argument ``s``.
    """
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    names = dict(variables) if variables is not None else state_variables(dimension)
    consts = dict(BUILTIN_CONSTANTS)
    if constants:
        for key, val in constants.items():
            if key in names or key in _ops.FUNCTIONS:
                raise ExprSyntaxError(f"constant {key!r} shadows a variable or function", 0)
            if not math.isfinite(float(val)):
                raise ExprSyntaxError(f"constant {key!r} is not finite", 0)
            consts[key] = float(val)
    return _Parser(src, names, consts).parse()


def to_text(e: Expr) -> str:
    """Fully parenthesized source that parses back to an equal tree."""
    if isinstance(e, Num):
        return f"({e.value!r})" if math.copysign(1.0, e.value) < 0 else repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_text(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    return f"{e.func}({', '.join(to_text(a) for a in e.args)})"


def evaluate(e: Expr, t: float, x: Sequence[float] = ()) -> float:
    """Tree-walking evaluation; domain violations raise :class:`EvaluationError`."""
    return _eval(e, float(t), x)


def _eval(e: Expr, t: float, x) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return t if e.index == 0 else float(x[e.index - 1])
    if isinstance(e, Neg):
        return -_eval(e.operand, t, x)
    if isinstance(e, BinOp):
        a = _eval(e.left, t, x)
        b = _eval(e.right, t, x)
        try:
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            if e.op == "/":
                return _ops.c_div(a, b)
            return _ops.c_pow(a, b)
        except EvaluationError as exc:
            raise EvaluationError(f"{exc} in {to_text(e)}", to_text(e)) from None
    args = [_eval(a, t, x) for a in e.args]
    try:
        return _ops.CHECKED[e.func](*args)
    except EvaluationError as exc:
        raise EvaluationError(f"{exc} in {to_text(e)}", to_text(e)) from None


def to_program(e: Expr) -> tuple[list[int], list[float]]:
    """Flatten ``e`` into postfix ``(code, consts)``; code holds (op, arg) pairs."""
    code: list[int] = []
    consts: list[float] = []

    def emit(node):
        if isinstance(node, Num):
            code.extend((_ops.CONST, len(consts)))
            consts.append(node.value)
        elif isinstance(node, Var):
            if node.index == 0:
                code.extend((_ops.TIME, 0))
            else:
                code.extend((_ops.STATE, node.index - 1))
        elif isinstance(node, Neg):
            emit(node.operand)
            code.extend((_ops.NEG, 0))
        elif isinstance(node, BinOp):
            emit(node.left)
            emit(node.right)
            code.extend((_ops.BINARY_OPS[node.op], 0))
        else:
            for a in node.args:
                emit(a)
            code.extend((_ops.FUNCTIONS[node.func][0], 0))

    emit(e)
    return code, consts


def to_callable(e: Expr):
    """Generated closure ``f(t, x) -> float`` with the same semantics as :func:`evaluate`."""
    return _ops.program_callable(*to_program(e))


def compile_expr(src: str, dimension: int = 0, constants=None):
    """Parse ``src`` and return a fast ``f(t, x)`` callable."""
    return to_callable(parse(src, dimension, constants))


@dataclass(frozen=True)
class TwoBranchExpr:
    """Expression pair for the off-jump and on-jump branches of a function."""

    continuous: Expr
    jump: Expr | None = None

    @classmethod
    def parse(cls, continuous: str, jump: str | None = None, dimension: int = 0, constants=None):
        return cls(parse(continuous, dimension, constants),
                   None if jump is None else parse(jump, dimension, constants))

    @property
    def jump_or_continuous(self) -> Expr:
        return self.continuous if self.jump is None else self.jump
