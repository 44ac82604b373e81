import math
import random
import struct

import pytest
from hypothesis import given, strategies as st

from stieltjes import exprdsl, kernels
from stieltjes.errors import EvaluationError, ExprSyntaxError

import exprref


def same_bits(a, b):
    return struct.pack("<d", a) == struct.pack("<d", b) or (math.isnan(a) and math.isnan(b))


def all_ways(src, t, x, dimension=2, constants=None):
    e = exprdsl.parse(src, dimension, constants)
    code, consts = exprdsl.to_program(e)
    out = []
    for fn in (lambda: exprdsl.evaluate(e, t, x), lambda: exprdsl.to_callable(e)(t, list(x)),
               lambda: kernels.python_backend.eval_program(code, consts, t, list(x)),
               *([lambda: kernels.native_backend.eval_program(code, consts, t, list(x))]
                 if kernels.native_backend is not None else [])):
        try:
            out.append(fn())
        except EvaluationError:
            out.append("error")
    return out


def test_examples():
    f = exprdsl.compile_expr("-t*atan(x1)", 1)
    assert f(2.0, [1.0]) == pytest.approx(-math.pi / 2, rel=1e-15)
    assert exprdsl.compile_expr("x1*(1 - x1/100)*(x1/50 - 1)*0.001", 1)(0.0, [50.0]) == 0.0
    assert exprdsl.evaluate(exprdsl.parse("1"), 123.0) == 1.0
    assert exprdsl.evaluate(exprdsl.parse("exp(2/4)-1"), 0.0) == pytest.approx(0.648721, abs=1e-6)
    assert exprdsl.evaluate(exprdsl.parse("min(3, t)"), 5.0) == 3.0
    assert exprdsl.evaluate(exprdsl.parse("x1^2 + x2^2", 2), 0.0, [1.0, 2.0]) == 5.0


@pytest.mark.parametrize("src, value", [
    ("2^3^2", 512.0), ("-2^2", -4.0), ("2^-1", 0.5), ("-2*3", -6.0), ("8/4/2", 1.0),
    ("1-2-3", -4.0), ("2*3+4*5", 26.0), ("(1+2)*3", 9.0), ("--3", 3.0), ("2^-1^2", 0.5),
    ("max(1, 2) - min(1, 2)", 1.0), ("abs(-3)", 3.0), ("  1 +\t2 ", 3.0),
])
def test_precedence(src, value):
    assert exprdsl.evaluate(exprdsl.parse(src), 0.0) == value


@pytest.mark.parametrize("src, offset", [
    ("", 0), ("1 +", 3), ("(1", 2), ("1 2", 2), ("foo", 0), ("sin", 0), ("min(1)", 0),
    ("x3", 0), ("1 $ 2", 2), ("sin(1, 2)", 0), ("2*)", 2),
])
def test_syntax_errors(src, offset):
    with pytest.raises(ExprSyntaxError) as exc:
        exprdsl.parse(src, 2)
    assert exc.value.offset == offset


@pytest.mark.parametrize("src", ["log(-1)", "sqrt(x1)", "1/(t-t)", "(-8)^(1/3)", "exp(1000)", "log(0)"])
def test_domain_errors(src):
    e = exprdsl.parse(src, 1)
    with pytest.raises(EvaluationError) as exc:
        exprdsl.evaluate(e, 1.0, [-1.0])
    assert exc.value.where
    assert set(all_ways(src, 1.0, [-1.0], 1)) == {"error"}


def test_constants():
    e = exprdsl.parse("rho*x1", 1, {"rho": 0.5})
    assert exprdsl.evaluate(e, 0, [4.0]) == 2.0
    with pytest.raises(ExprSyntaxError):
        exprdsl.parse("t", 0, {"t": 1.0})
    with pytest.raises(ExprSyntaxError):
        exprdsl.parse("1", 0, {"sin": 1.0})


def test_two_branch():
    tb = exprdsl.TwoBranchExpr.parse("-x1", None, 1)
    assert tb.jump_or_continuous is tb.continuous
    tb = exprdsl.TwoBranchExpr.parse("-x1", "0.5*x1", 1)
    assert exprdsl.evaluate(tb.jump_or_continuous, 0, [2.0]) == 1.0


def test_reference_matches_on_seeded_sample():
    rng = random.Random(7)
    for _ in range(300):
        src = exprref.random_expr(rng)
        t, x = rng.uniform(-3, 3), [rng.uniform(-3, 3), rng.uniform(0.1, 4)]
        try:
            ref = exprref.evaluate(src, t, x)
        except exprref.RefError:
            ref = "error"
        for got in all_ways(src, t, x):
            assert got == ref or (ref != "error" and got != "error" and same_bits(got, ref)), src


@given(st.integers(0, 2**32 - 1))
def test_round_trip(seed):
    src = exprref.random_expr(random.Random(seed))
    e = exprdsl.parse(src, 2)
    assert exprdsl.parse(exprdsl.to_text(e), 2) == e


@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_backends_bit_identical(seed, t, a, b):
    src = exprref.random_expr(random.Random(seed))
    vals = all_ways(src, t, [a, b])
    first = vals[0]
    for v in vals[1:]:
        assert (v == "error") == (first == "error")
        if v != "error":
            assert same_bits(v, first)
    for _ in range(2):
        again = all_ways(src, t, [a, b])
        assert all(u == v or same_bits(u, v) for u, v in zip(again, vals) if "error" not in (u, v))
