"""Parser, evaluator, and symbolic-derivative tests for the expression DSL."""

import math
import random

import numpy as np
import pytest

from rellich.expr import (Binary, Const, DomainError, Iter, Param, ParseError,
                          Unary, UnboundParameterError, Var, differentiate,
                          evaluate, fd_check, parse)


class TestParse:
    def test_simple_tree_shape(self):
        e = parse("n/(2*t)")
        assert isinstance(e, Binary) and e.op == "/"
        assert isinstance(e.left, Param) and e.left.name == "n"
        assert isinstance(e.right, Binary) and e.right.op == "*"

    def test_precedence(self):
        assert parse("2+3*4").evaluate({}) == 14.0
        assert parse("2*3+4").evaluate({}) == 10.0
        assert parse("2*3^2").evaluate({}) == 18.0
        assert parse("(2+3)*4").evaluate({}) == 20.0

    def test_power_right_associative(self):
        assert parse("2^3^2").evaluate({}) == 512.0  # 2^(3^2)

    def test_unary_minus(self):
        # per the grammar, "-" binds at the base level: -t^2 is (-t)^2
        assert parse("-t^2").evaluate({"t": 3.0}) == 9.0
        assert parse("-(t^2)").evaluate({"t": 3.0}) == -9.0
        assert parse("2--3").evaluate({}) == 5.0

    def test_iterated_log_parse(self):
        e = parse("logk(2, r/t)")
        assert isinstance(e, Iter) and e.depth == 2 and e.func == "logk"

    def test_numbers(self):
        assert parse("1.5e2").evaluate({}) == 150.0
        assert parse(".25").evaluate({}) == 0.25
        assert parse("2e-3").evaluate({}) == 0.002

    def test_constants(self):
        assert parse("pi").evaluate({}) == math.pi
        assert parse("e").evaluate({}) == math.e

    def test_whitespace_insignificant(self):
        a = parse("n /( 2*t )").evaluate({"n": 6.0, "t": 3.0})
        b = parse("n/(2*t)").evaluate({"n": 6.0, "t": 3.0})
        assert a == b

    def test_syntax_error_offset(self):
        with pytest.raises(ParseError) as err:
            parse("2+*3")
        assert err.value.offset == 2

    def test_unknown_identifier(self):
        with pytest.raises(ParseError, match="unknown identifier"):
            parse("2*x")

    def test_unknown_function(self):
        with pytest.raises(ParseError, match="unknown identifier"):
            parse("foo(t)")

    def test_arity_mismatch(self):
        with pytest.raises(ParseError, match="argument"):
            parse("log(t, t)")
        with pytest.raises(ParseError, match="argument"):
            parse("logk(t)")

    def test_iter_depth_must_be_literal(self):
        with pytest.raises(ParseError, match="depth"):
            parse("logk(t, t)")
        with pytest.raises(ParseError, match="depth"):
            parse("logk(-1, t)")

    def test_trailing_garbage(self):
        with pytest.raises(ParseError):
            parse("1+2)")


class TestEvaluate:
    def test_arithmetic(self):
        assert evaluate(parse("n/(2*t)"), {"n": 6.0, "t": 3.0}) == 1.0

    def test_ct_zero_curvature(self):
        assert evaluate(parse("ct(t)"), {"kappa": 0.0, "t": 2.0}) == 0.5

    def test_ct_hyperbolic(self):
        # independent: coth(1) = cosh(1)/sinh(1)
        want = math.cosh(1.0) / math.sinh(1.0)
        got = evaluate(parse("ct(t)"), {"kappa": 1.0, "t": 1.0})
        assert got == pytest.approx(want, abs=1e-14)
        assert got == pytest.approx(1.3130352855, abs=1e-9)

    def test_iterated_log_value(self):
        got = evaluate(parse("logk(1, r/t)"), {"r": math.e, "t": 1.0})
        assert got == pytest.approx(1.0, abs=1e-15)

    def test_iterated_identity_depth_zero(self):
        for x in (0.1, 1.0, 7.5, 123.0):
            assert evaluate(parse("logk(0, t)"), {"t": x}) == x
            assert evaluate(parse("expk(0, t)"), {"t": x}) == x

    def test_unbound_parameter(self):
        with pytest.raises(UnboundParameterError):
            evaluate(parse("n*t"), {"t": 1.0})

    def test_log_domain(self):
        with pytest.raises(DomainError):
            evaluate(parse("log(t)"), {"t": -1.0})

    def test_sqrt_domain(self):
        with pytest.raises(DomainError):
            evaluate(parse("sqrt(t-2)"), {"t": 1.0})

    def test_division_by_zero(self):
        with pytest.raises(DomainError):
            evaluate(parse("1/(t-1)"), {"t": 1.0})

    def test_noninteger_power_needs_positive_base(self):
        with pytest.raises(DomainError):
            evaluate(parse("(t-2)^0.5"), {"t": 1.0})

    def test_integer_power_of_negative_base(self):
        assert evaluate(parse("(t-2)^3"), {"t": 1.0}) == -1.0

    def test_integer_power_accuracy(self):
        # repeated multiplication: exact for small integer powers
        assert evaluate(parse("t^4"), {"t": 3.0}) == 81.0
        assert evaluate(parse("t^-2"), {"t": 4.0}) == pytest.approx(0.0625, rel=1e-16)

    def test_coth_domain(self):
        with pytest.raises(DomainError):
            evaluate(parse("coth(t-1)"), {"t": 1.0})

    def test_vectorized_matches_scalar(self):
        e = parse("sinh(t)/t + ct(t)^2")
        ts = np.array([0.25, 1.0, 3.0])
        vec = evaluate(e, {"kappa": 1.0, "t": ts})
        for i, t in enumerate(ts):
            assert vec[i] == pytest.approx(
                evaluate(e, {"kappa": 1.0, "t": float(t)}), rel=1e-15)

    def test_vectorized_domain_error(self):
        with pytest.raises(DomainError):
            evaluate(parse("log(t)"), {"t": np.array([1.0, -1.0])})

    def test_overflow_saturates_without_nan(self):
        # 1/sinh^2 underflows gracefully to 0 for huge arguments
        got = evaluate(parse("1/sinh(t)^2"), {"t": 1000.0})
        assert got == 0.0

    def test_mpmath_backend_deep_range(self):
        import mpmath

        mpmath.mp.dps = 25
        t = mpmath.exp(mpmath.mpf(-2000))
        got = evaluate(parse("t^2*(1/(t^2*log(r/t)^2))"), {"t": t, "r": math.e})
        assert float(got) == pytest.approx(1.0 / 2001.0 ** 2, rel=1e-12)


class TestDifferentiate:
    def test_power_rule(self):
        d = differentiate(parse("n/(2*t)"))
        got = d.evaluate({"n": 6.0, "t": 2.0})
        assert got == pytest.approx(-6.0 / (2 * 4.0), rel=1e-15)

    def test_ct_derivative_value(self):
        d = differentiate(parse("ct(t)"))
        got = d.evaluate({"kappa": 1.0, "t": 1.0})
        assert got == pytest.approx(1.0 - math.cosh(1.0) ** 2 / math.sinh(1.0) ** 2,
                                    abs=1e-12)
        assert got == pytest.approx(-0.7240616608, abs=1e-9)
        # the same closed form covers kappa = 0: d(1/t) = -1/t^2
        got0 = d.evaluate({"kappa": 0.0, "t": 2.0})
        assert got0 == pytest.approx(-0.25, rel=1e-15)

    def test_sqrt_log_derivative(self):
        e = parse("sqrt(logk(1, r/t))")
        got = differentiate(e).evaluate({"r": math.e, "t": 1.0})
        assert got == pytest.approx(-0.5, rel=1e-12)

    def test_fd_oracle_ct(self):
        assert fd_check(parse("ct(t)"), {"kappa": 1.0, "t": 0.5}, h=1e-6) <= 1e-6

    def test_fd_oracle_quadratic(self):
        assert fd_check(parse("t^2"), {"t": 3.0}, h=1e-5) <= 1e-8

    def test_derivative_closed_under_primitives(self):
        # differentiating any parsed catalog-like expression yields an Expr
        # that still evaluates and prints
        for text in ("ct(t)^2", "logk(3, r/t)", "expk(2, t/10)",
                     "sqrt(logk(1, r/t))*t^-1.5", "tanh(t)*coth(t)"):
            d = differentiate(parse(text))
            s = str(d)
            val = parse(s).evaluate({"kappa": 0.5, "r": 40.0, "t": 1.3})
            assert val == pytest.approx(d.evaluate({"kappa": 0.5, "r": 40.0, "t": 1.3}),
                                        rel=1e-12)


def _bounded(e):
    """Squash a subtree into (0.5, 2.5) so random nests stay well conditioned
    (the finite-difference oracle loses accuracy on badly scaled trees)."""
    return Const(1.5) + Unary("tanh", e)


def _random_expr(rng: random.Random, depth: int):
    """Random tree over safe-domain constructions (arguments kept positive
    where the primitive needs it, magnitudes kept moderate)."""
    if depth == 0 or rng.random() < 0.25:
        c = rng.choice(["t", "t", "const", "n"])
        if c == "t":
            return Var()
        if c == "n":
            return Param("n")
        return Const(rng.uniform(0.2, 3.0))
    kind = rng.choice(["add", "sub", "mul", "div", "pow", "fn", "iter"])
    a = _random_expr(rng, depth - 1)
    if kind in ("add", "sub", "mul", "div"):
        b = _random_expr(rng, depth - 1)
        op = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[kind]
        if kind == "div":
            b = _bounded(b)  # keep the denominator positive
        return Binary(op, a, b)
    if kind == "pow":
        return Binary("^", _bounded(a), Const(rng.choice([-2.0, -1.0, 2.0, 3.0, 0.5])))
    if kind == "fn":
        fn = rng.choice(["log", "exp", "sqrt", "sinh", "cosh", "tanh", "coth", "ct"])
        if fn in ("log", "sqrt", "coth", "ct"):
            return Unary(fn, _bounded(a))
        return Unary(fn, Unary("tanh", a))
    return Iter(rng.choice(["logk", "expk"]), rng.randint(0, 2), _bounded(a))


class TestFdProperty:
    def test_fd_check_random_trees(self):
        """1000 random trees of depth <= 6, 20 points each:
        |fd - symbolic| <= 1e-5 * (1 + |f'|)."""
        rng = random.Random(20260809)
        npts = 20
        trees_checked = 0
        points_checked = 0
        for _ in range(1000):
            e = _random_expr(rng, rng.randint(1, 6))
            d = e.diff("t")
            pts = [rng.uniform(0.1, 10.0) for _ in range(npts)]
            base = {"kappa": rng.choice([0.0, 1.0]), "n": 5.0, "r": 30.0}
            def _fd(h):
                up = np.broadcast_to(np.asarray(
                    e.evaluate({**base, "t": ts + h}), dtype=float), ts.shape)
                dn = np.broadcast_to(np.asarray(
                    e.evaluate({**base, "t": ts - h}), dtype=float), ts.shape)
                return (up - dn) / (2 * h)

            try:
                ts = np.array(pts)
                sym = np.broadcast_to(np.asarray(
                    d.evaluate({**base, "t": ts}), dtype=float), ts.shape)
                fd = _fd(1e-6)
                fd2 = _fd(8e-6)
            except DomainError:
                continue
            tol = 1e-5 * (1.0 + np.abs(sym))
            # self-validating oracle: only where the two step sizes agree is
            # the central difference itself accurate enough to judge
            usable = np.abs(fd - fd2) <= 0.3 * tol
            ok = np.abs(fd - sym) <= tol
            assert (ok | ~usable).all(), f"fd mismatch for {e}"
            trees_checked += 1
            points_checked += int(usable.sum())
        assert trees_checked >= 900   # domain rejections must stay rare
        assert points_checked >= 15_000

    def test_roundtrip_random_trees(self):
        rng = random.Random(7)
        for _ in range(300):
            e = _random_expr(rng, rng.randint(1, 5))
            text = str(e)
            e2 = parse(text)
            for t in (0.3, 1.0, 4.5):
                b = {"kappa": 1.0, "n": 5.0, "r": 30.0, "t": t}
                try:
                    want = e.evaluate(b)
                except DomainError:
                    continue
                assert e2.evaluate(b) == pytest.approx(want, rel=1e-12, abs=1e-12)


class TestImmutability:
    def test_nodes_reject_mutation(self):
        e = parse("t^2")
        with pytest.raises(AttributeError):
            e.op = "+"
        with pytest.raises(AttributeError):
            Const(1.0).value = 2.0
