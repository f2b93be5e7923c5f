"""Differentiable scalar expressions of one radial variable t.

Expressions are immutable trees over the variable ``t`` and the named
parameters ``n, kappa, lambda, r, R, c, k``.  They support evaluation
(float, numpy array, or mpmath backends, chosen from the type of the
``t`` binding), closed-form differentiation, printing back to the DSL,
and a finite-difference self check.

Supported primitives: + - * / ^ (real power), negation, log, exp, sqrt,
sinh, cosh, tanh, coth, the curvature-aware ``ct`` (1/t when kappa = 0,
kappa*coth(kappa*t) when kappa > 0), and the iterated forms
``logk(i, x)`` / ``expk(i, x)`` with depth i >= 0 (depth 0 is the
identity).
"""

from __future__ import annotations

import math
import re
from typing import Callable, Mapping, Union

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Param", "Unary", "Binary", "Iter",
    "Bindings", "parse", "evaluate", "differentiate", "fd_check",
    "ExprError", "ParseError", "EvaluationError", "UnboundParameterError",
    "DomainError", "const", "var_t", "param",
]

PARAMETER_NAMES = ("n", "kappa", "lambda", "r", "R", "c", "k")
_CONSTANT_NAMES = {"pi": math.pi, "e": math.e}
_UNARY_FUNCTIONS = ("log", "exp", "sqrt", "sinh", "cosh", "tanh", "coth", "ct")
_ITER_FUNCTIONS = ("logk", "expk")

Number = Union[int, float]
Bindings = Mapping[str, object]


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    """Syntax/identifier/arity error, carrying the byte offset into the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvaluationError(ExprError):
    """Base class for evaluation-time failures."""


class UnboundParameterError(EvaluationError):
    def __init__(self, name: str):
        super().__init__(f"parameter {name!r} is not bound")
        self.name = name


class DomainError(EvaluationError):
    """A primitive was applied outside its domain; never silently NaN."""

    def __init__(self, primitive: str, value):
        super().__init__(f"domain violation in {primitive!r} at argument {value!r}")
        self.primitive = primitive
        self.value = value


# ---------------------------------------------------------------------------
# numeric backends


def _coth_float(x):
    if x == 0.0:
        raise DomainError("coth", x)
    return 1.0 / math.tanh(x)


def _sinh_float(x):
    try:
        return math.sinh(x)
    except OverflowError:
        return math.copysign(math.inf, x)


def _cosh_float(x):
    try:
        return math.cosh(x)
    except OverflowError:
        return math.inf


def _exp_float(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


class _FloatBackend:
    name = "float"

    @staticmethod
    def log(x):
        if x <= 0:
            raise DomainError("log", x)
        return math.log(x)

    @staticmethod
    def sqrt(x):
        if x < 0:
            raise DomainError("sqrt", x)
        return math.sqrt(x)

    exp = staticmethod(_exp_float)
    sinh = staticmethod(_sinh_float)
    cosh = staticmethod(_cosh_float)
    tanh = staticmethod(math.tanh)
    coth = staticmethod(_coth_float)

    @staticmethod
    def isnan(x):
        return isinstance(x, float) and math.isnan(x)


class _NumpyBackend:
    name = "numpy"

    @staticmethod
    def _check(mask, primitive, x):
        if np.any(mask):
            bad = np.asarray(x)[np.asarray(mask)].flat[0]
            raise DomainError(primitive, float(bad))

    @classmethod
    def log(cls, x):
        cls._check(np.asarray(x) <= 0, "log", x)
        return np.log(x)

    @classmethod
    def sqrt(cls, x):
        cls._check(np.asarray(x) < 0, "sqrt", x)
        return np.sqrt(x)

    @staticmethod
    def exp(x):
        with np.errstate(over="ignore"):
            return np.exp(x)

    @staticmethod
    def sinh(x):
        with np.errstate(over="ignore"):
            return np.sinh(x)

    @staticmethod
    def cosh(x):
        with np.errstate(over="ignore"):
            return np.cosh(x)

    tanh = staticmethod(np.tanh)

    @classmethod
    def coth(cls, x):
        cls._check(np.asarray(x) == 0, "coth", x)
        return 1.0 / np.tanh(x)

    @staticmethod
    def isnan(x):
        return bool(np.any(np.isnan(x)))


class _MpmathBackend:
    name = "mpmath"

    def __getattr__(self, fname):
        import mpmath

        if fname == "coth":
            return mpmath.coth
        return getattr(mpmath, fname)

    @staticmethod
    def isnan(x):
        import mpmath

        return mpmath.isnan(x)


_MPMATH_BACKEND = _MpmathBackend()


def _pick_backend(t_value):
    if isinstance(t_value, np.ndarray):
        return _NumpyBackend
    tname = type(t_value).__module__
    if tname.startswith("mpmath") or tname.startswith("sympy.mpmath"):
        return _MPMATH_BACKEND
    return _FloatBackend


def _ipow(x, k: int):
    """x**k for integer k by binary exponentiation (accurate, sign-safe)."""
    if k < 0:
        return 1.0 / _ipow(x, -k)
    result = None
    base = x
    while k:
        if k & 1:
            result = base if result is None else result * base
        base = base * base
        k >>= 1
    return 1.0 if result is None else result


# ---------------------------------------------------------------------------
# expression nodes


class Expr:
    """Immutable expression tree node; evaluation is deterministic."""

    __slots__ = ()

    precedence = 4

    def evaluate(self, bindings: Bindings):
        backend = _pick_backend(bindings.get("t"))
        if backend is _NumpyBackend:
            # overflow saturates to inf by design; NaN is still rejected below
            with np.errstate(all="ignore"):
                result = self._ev(bindings, backend)
        else:
            result = self._ev(bindings, backend)
        if backend.isnan(result):
            raise DomainError("expression", "NaN produced")
        return result

    def diff(self, var: str = "t") -> "Expr":
        return self._diff(var)

    # subclasses implement _ev / _diff / __str__

    def _paren(self, child: "Expr", tight: bool = False) -> str:
        if child.precedence < self.precedence or (tight and child.precedence == self.precedence):
            return f"({child})"
        return str(child)

    def __add__(self, other):
        return add(self, _as_expr(other))

    def __radd__(self, other):
        return add(_as_expr(other), self)

    def __sub__(self, other):
        return sub(self, _as_expr(other))

    def __rsub__(self, other):
        return sub(_as_expr(other), self)

    def __mul__(self, other):
        return mul(self, _as_expr(other))

    def __rmul__(self, other):
        return mul(_as_expr(other), self)

    def __truediv__(self, other):
        return div(self, _as_expr(other))

    def __rtruediv__(self, other):
        return div(_as_expr(other), self)

    def __pow__(self, other):
        return pow_(self, _as_expr(other))

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"{type(self).__name__}<{self}>"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        v = float(value)
        if math.isnan(v) or math.isinf(v):
            raise ValueError("constants must be finite")
        object.__setattr__(self, "value", v)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def _ev(self, b, be):
        return self.value

    def _diff(self, var):
        return Const(0.0)

    def __str__(self):
        return repr(self.value)


class Var(Expr):
    """The radial variable t."""

    __slots__ = ()

    def _ev(self, b, be):
        try:
            return b["t"]
        except KeyError:
            raise UnboundParameterError("t") from None

    def _diff(self, var):
        return Const(1.0 if var == "t" else 0.0)

    def __str__(self):
        return "t"


class Param(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if name not in PARAMETER_NAMES:
            raise ValueError(f"unknown parameter {name!r}")
        object.__setattr__(self, "name", name)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def _ev(self, b, be):
        try:
            return b[self.name]
        except KeyError:
            raise UnboundParameterError(self.name) from None

    def _diff(self, var):
        return Const(1.0 if var == self.name else 0.0)

    def __str__(self):
        return self.name


class Unary(Expr):
    __slots__ = ("op", "child")

    precedence = 4  # function application / prefix minus

    def __init__(self, op: str, child: Expr):
        if op != "neg" and op not in _UNARY_FUNCTIONS:
            raise ValueError(f"unknown unary op {op!r}")
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "child", child)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def _ev(self, b, be):
        x = self.child._ev(b, be)
        op = self.op
        if op == "neg":
            return -x
        if op == "ct":
            return _eval_ct(x, b, be)
        return getattr(be, op)(x)

    def _diff(self, var):
        u = self.child
        du = u._diff(var)
        op = self.op
        if op == "neg":
            return neg(du)
        if op == "log":
            return div(du, u)
        if op == "exp":
            return mul(Unary("exp", u), du)
        if op == "sqrt":
            return div(du, mul(Const(2.0), Unary("sqrt", u)))
        if op == "sinh":
            return mul(Unary("cosh", u), du)
        if op == "cosh":
            return mul(Unary("sinh", u), du)
        if op == "tanh":
            return mul(sub(Const(1.0), pow_(Unary("tanh", u), Const(2.0))), du)
        if op == "coth":
            return mul(sub(Const(1.0), pow_(Unary("coth", u), Const(2.0))), du)
        if op == "ct":
            # d ct(u) = (kappa^2 - ct(u)^2) u', valid for kappa = 0 too
            return mul(
                sub(pow_(Param("kappa"), Const(2.0)), pow_(Unary("ct", u), Const(2.0))),
                du,
            )
        raise AssertionError(op)

    def __str__(self):
        if self.op == "neg":
            return f"-{self._paren(self.child, tight=True)}"
        return f"{self.op}({self.child})"


def _eval_ct(x, bindings, backend):
    try:
        kappa = bindings["kappa"]
    except KeyError:
        raise UnboundParameterError("kappa") from None
    if backend is _NumpyBackend:
        _NumpyBackend._check(np.asarray(x) <= 0, "ct", x)
        if kappa == 0:
            return 1.0 / x
        return kappa / np.tanh(kappa * x)
    if backend is _FloatBackend:
        if x <= 0:
            raise DomainError("ct", x)
        if kappa == 0:
            return 1.0 / x
        return kappa / math.tanh(kappa * x)
    if x <= 0:
        raise DomainError("ct", x)
    if kappa == 0:
        return 1 / x
    return kappa * _MPMATH_BACKEND.coth(kappa * x)


class Binary(Expr):
    __slots__ = ("op", "left", "right")

    _PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}

    def __init__(self, op: str, left: Expr, right: Expr):
        if op not in self._PRECEDENCE:
            raise ValueError(f"unknown binary op {op!r}")
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    @property
    def precedence(self):
        return self._PRECEDENCE[self.op]

    def _ev(self, b, be):
        op = self.op
        x = self.left._ev(b, be)
        if op == "^":
            return _eval_pow(x, self.right, b, be)
        y = self.right._ev(b, be)
        if op == "+":
            return x + y
        if op == "-":
            return x - y
        if op == "*":
            return x * y
        # division
        if be is _NumpyBackend:
            _NumpyBackend._check(np.asarray(y) == 0, "/", y)
            return x / y
        if y == 0:
            raise DomainError("/", y)
        return x / y

    def _diff(self, var):
        a, b_ = self.left, self.right
        da, db = a._diff(var), b_._diff(var)
        op = self.op
        if op == "+":
            return add(da, db)
        if op == "-":
            return sub(da, db)
        if op == "*":
            return add(mul(da, b_), mul(a, db))
        if op == "/":
            return div(sub(mul(da, b_), mul(a, db)), pow_(b_, Const(2.0)))
        # power: constant exponent uses the power rule, general case the log form
        if isinstance(b_, Const):
            e = b_.value
            return mul(mul(Const(e), pow_(a, Const(e - 1.0))), da)
        return mul(
            pow_(a, b_),
            add(mul(db, Unary("log", a)), div(mul(b_, da), a)),
        )

    def __str__(self):
        ls = self._paren(self.left, tight=(self.op == "^"))
        rs = self._paren(self.right, tight=(self.op in ("-", "/")))
        return f"{ls}{self.op}{rs}"


def _eval_pow(base, exponent: Expr, bindings, backend):
    if isinstance(exponent, Const) and float(exponent.value).is_integer():
        return _ipow(base, int(exponent.value))
    y = exponent._ev(bindings, backend)
    is_int = not isinstance(y, np.ndarray) and float(y).is_integer() \
        and not type(y).__module__.startswith("mpmath")
    if is_int:
        return _ipow(base, int(y))
    if backend is _NumpyBackend:
        _NumpyBackend._check(np.asarray(base) <= 0, "^", base)
        with np.errstate(over="ignore"):
            return np.power(base, y)
    if base <= 0:
        raise DomainError("^", base)
    if backend is _FloatBackend:
        try:
            return math.pow(base, y)
        except OverflowError:
            return math.inf
    return base ** y


class Iter(Expr):
    """Iterated apply: logk(i, x) / expk(i, x); depth 0 is the identity."""

    __slots__ = ("func", "depth", "child")

    def __init__(self, func: str, depth: int, child: Expr):
        if func not in _ITER_FUNCTIONS:
            raise ValueError(f"unknown iterated function {func!r}")
        if not isinstance(depth, int) or depth < 0:
            raise ValueError("iteration depth must be a nonnegative integer")
        object.__setattr__(self, "func", func)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "child", child)

    def __setattr__(self, *a):
        raise AttributeError("Expr nodes are immutable")

    def _ev(self, b, be):
        x = self.child._ev(b, be)
        f = be.log if self.func == "logk" else be.exp
        for _ in range(self.depth):
            x = f(x)
        return x

    def _diff(self, var):
        du = self.child._diff(var)
        if self.depth == 0:
            return du
        if self.func == "logk":
            # d log_[i](u) = u' * prod_{j<i} 1/log_[j](u)
            acc = du
            for j in range(self.depth):
                acc = div(acc, Iter("logk", j, self.child))
            return acc
        acc = du
        for j in range(1, self.depth + 1):
            acc = mul(acc, Iter("expk", j, self.child))
        return acc

    def __str__(self):
        return f"{self.func}({self.depth}, {self.child})"


# ---------------------------------------------------------------------------
# folding constructors (constant folding only, per the design decision)


def _as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(x)


def const(v: Number) -> Const:
    return Const(v)


def var_t() -> Var:
    return Var()


def param(name: str) -> Param:
    return Param(name)


def _fold(op: str, a: Expr, b: Expr):
    if isinstance(a, Const) and isinstance(b, Const):
        x, y = a.value, b.value
        if op == "+":
            return Const(x + y)
        if op == "-":
            return Const(x - y)
        if op == "*":
            return Const(x * y)
        if op == "/" and y != 0:
            return Const(x / y)
        if op == "^" and (x > 0 or float(y).is_integer()):
            return Const(_ipow(x, int(y)) if float(y).is_integer() else x ** y)
    return None


def add(a, b) -> Expr:
    a, b = _as_expr(a), _as_expr(b)
    return _fold("+", a, b) or Binary("+", a, b)


def sub(a, b) -> Expr:
    a, b = _as_expr(a), _as_expr(b)
    return _fold("-", a, b) or Binary("-", a, b)


def mul(a, b) -> Expr:
    a, b = _as_expr(a), _as_expr(b)
    return _fold("*", a, b) or Binary("*", a, b)


def div(a, b) -> Expr:
    a, b = _as_expr(a), _as_expr(b)
    return _fold("/", a, b) or Binary("/", a, b)


def pow_(a, b) -> Expr:
    a, b = _as_expr(a), _as_expr(b)
    return _fold("^", a, b) or Binary("^", a, b)


def neg(a) -> Expr:
    a = _as_expr(a)
    if isinstance(a, Const):
        return Const(-a.value)
    return Unary("neg", a)


# ---------------------------------------------------------------------------
# parser


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                stripped = text[pos:].lstrip()
                if not stripped:
                    break
                raise ParseError(f"unexpected character {stripped[0]!r}", len(text) - len(stripped))
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return ("eof", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok


def parse(text: str) -> Expr:
    """Parse a DSL string into an Expression.

    Raises ParseError (with byte offset) on syntax errors, unknown
    identifiers, and arity mismatches.
    """
    tz = _Tokenizer(text)
    e = _parse_expr(tz)
    kind, val, off = tz.peek()
    if kind != "eof":
        raise ParseError(f"unexpected trailing input {val!r}", off)
    return e


def _parse_expr(tz: _Tokenizer) -> Expr:
    e = _parse_term(tz)
    while True:
        kind, val, _ = tz.peek()
        if kind == "op" and val in "+-":
            tz.next()
            rhs = _parse_term(tz)
            e = add(e, rhs) if val == "+" else sub(e, rhs)
        else:
            return e


def _parse_term(tz: _Tokenizer) -> Expr:
    e = _parse_factor(tz)
    while True:
        kind, val, _ = tz.peek()
        if kind == "op" and val in "*/":
            tz.next()
            rhs = _parse_factor(tz)
            e = mul(e, rhs) if val == "*" else div(e, rhs)
        else:
            return e


def _parse_factor(tz: _Tokenizer) -> Expr:
    base = _parse_base(tz)
    kind, val, _ = tz.peek()
    if kind == "op" and val == "^":
        tz.next()
        return pow_(base, _parse_factor(tz))  # right-associative
    return base


def _parse_base(tz: _Tokenizer) -> Expr:
    kind, val, off = tz.next()
    if kind == "num":
        return Const(float(val))
    if kind == "op" and val == "-":
        return neg(_parse_base(tz))
    if kind == "op" and val == "(":
        e = _parse_expr(tz)
        kind, val, off = tz.next()
        if val != ")":
            raise ParseError("expected ')'", off)
        return e
    if kind == "ident":
        nkind, nval, _ = tz.peek()
        if nkind == "op" and nval == "(":
            return _parse_call(tz, val, off)
        if val == "t":
            return Var()
        if val in _CONSTANT_NAMES:
            return Const(_CONSTANT_NAMES[val])
        if val in PARAMETER_NAMES:
            return Param(val)
        raise ParseError(f"unknown identifier {val!r}", off)
    raise ParseError(f"expected expression, got {val!r}" if val else "unexpected end of input", off)


def _parse_call(tz: _Tokenizer, fname: str, off: int) -> Expr:
    tz.next()  # consume "("
    args = [_parse_expr(tz)]
    while True:
        kind, val, aoff = tz.next()
        if val == ")":
            break
        if val != ",":
            raise ParseError("expected ',' or ')'", aoff)
        args.append(_parse_expr(tz))
    if fname in _UNARY_FUNCTIONS:
        if len(args) != 1:
            raise ParseError(f"{fname}() takes exactly 1 argument, got {len(args)}", off)
        return Unary(fname, args[0])
    if fname in _ITER_FUNCTIONS:
        if len(args) != 2:
            raise ParseError(f"{fname}() takes exactly 2 arguments, got {len(args)}", off)
        depth = args[0]
        if not isinstance(depth, Const) or not float(depth.value).is_integer() or depth.value < 0:
            raise ParseError(f"{fname}() depth must be a nonnegative integer literal", off)
        return Iter(fname, int(depth.value), args[1])
    raise ParseError(f"unknown identifier {fname!r}", off)


# ---------------------------------------------------------------------------
# module-level operation wrappers


def evaluate(e: Expr, bindings: Bindings):
    """Evaluate e under the given parameter/variable bindings."""
    return e.evaluate(bindings)


def differentiate(e: Expr, var: str = "t") -> Expr:
    """Return de/dvar as an Expression (closed under the primitive set)."""
    return e.diff(var)


def fd_check(e: Expr, bindings: Bindings, h: float = 1e-6) -> float:
    """|symbolic derivative - central difference| of e at the bound point."""
    t = float(bindings["t"])
    lo = dict(bindings, t=t - h)
    hi = dict(bindings, t=t + h)
    central = (e.evaluate(hi) - e.evaluate(lo)) / (2.0 * h)
    symbolic = e.diff("t").evaluate(dict(bindings, t=t))
    return abs(symbolic - central)


ExprLike = Union[Expr, Callable[[float], float]]


def as_callable(f: ExprLike, bindings: Bindings | None = None) -> Callable:
    """Adapt an Expression (with fixed parameter bindings) or a callable to t -> value."""
    if isinstance(f, Expr):
        fixed = dict(bindings or {})

        def _call(t):
            return f.evaluate({**fixed, "t": t})

        return _call
    return f
