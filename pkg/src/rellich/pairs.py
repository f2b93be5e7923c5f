"""Riccati pairs, dual Riccati pairs, Bessel potentials/pairs, and their checks.

A PairSpec bundles the defining expressions of one of four object kinds:

  primal            (G, w, W):   G' + (L + w'/w) G - G^2 >= W
  dual              (H, v, V):  -H' + (L - v'/v) H - H^2 >= V
  bessel-potential  (z, Z; c):   z'' + z'/t + c Z z = 0
  bessel-pair       (y?, X, Y; C): y'' + ((n-1)/t + X'/X) y' + C Y/X y = 0

with L(t) = (n-1) ct_kappa(t).  Residual evaluators, the primal<->dual
change of functions, the potential-to-pair constructions, an ODE
disconjugacy certificate for "a positive solution exists", and a grid
positivity scanner live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from . import expr as ex
from .expr import Const, Expr, Param, Unary, Var
from .geometry import SpaceForm

__all__ = [
    "PairSpec", "PositivityReport", "ResidualReport", "DisconjugacyReport",
    "riccati_residual", "dual_riccati_residual", "e1", "e2",
    "primal_to_dual", "dual_to_primal",
    "bessel_potential_residual", "bessel_pair_residual",
    "from_bessel_potential", "from_bessel_pair", "bessel_pairs_from_potential",
    "disconjugacy_check", "scan_positivity", "positivity_polynomial_roots",
    "polynomial_criterion_holds", "residual_expr", "residual_report",
    "DEFAULT_RESIDUAL_TOL", "log_grid",
]

DEFAULT_RESIDUAL_TOL = 1e-9

_ROLES = {
    "primal": ("G", "w", "W"),
    "dual": ("H", "v", "V"),
    "bessel-potential": ("z", "Z"),
    "bessel-pair": ("X", "Y"),  # y optional
}


@dataclass(frozen=True)
class PairSpec:
    """Tagged bundle of expressions with their constants and parameter bindings."""

    kind: str
    exprs: dict
    constant: float = 1.0          # c for bessel-potential, C for bessel-pair
    params: dict = field(default_factory=dict)
    allow_signed_W: bool = False   # Definitions require W, V >= 0; override flag
    note: str = ""
    # optional closed-form logarithmic derivatives (role -> expr for f'/f);
    # needed when a weight like 1/sinh^2 underflows so f'/f would be 0/0
    logd: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _ROLES:
            raise ValueError(f"unknown pair kind {self.kind!r}")
        missing = [r for r in _ROLES[self.kind] if r not in self.exprs]
        if missing:
            raise ValueError(f"{self.kind} spec is missing roles {missing}")
        for role, e in self.exprs.items():
            if not isinstance(e, Expr):
                raise TypeError(f"role {role!r} must be an Expression")

    def require(self, kind: str) -> "PairSpec":
        if self.kind != kind:
            raise ValueError(f"expected a {kind} spec, got {self.kind}")
        return self

    def expr(self, role: str) -> Expr:
        return self.exprs[role]

    def bindings(self, sf: Optional[SpaceForm] = None, t=None) -> dict:
        b = dict(self.params)
        if sf is not None:
            b["n"] = float(sf.n)
            b["kappa"] = float(sf.kappa)
        if t is not None:
            b["t"] = t
        return b

    def with_constant(self, value: float) -> "PairSpec":
        return replace(self, constant=value)


def _big_l_expr() -> Expr:
    return (Param("n") - 1.0) * Unary("ct", Var())


def _ct_expr() -> Expr:
    return Unary("ct", Var())


def log_grid(lo: float, hi: float, size: int) -> np.ndarray:
    return np.exp(np.linspace(math.log(lo), math.log(hi), size))


# ---------------------------------------------------------------------------
# residual expressions and pointwise evaluation


def _logd(p: PairSpec, role: str) -> Expr:
    """f'/f for the given role, preferring a provided closed form."""
    if role in p.logd:
        return p.logd[role]
    f = p.expr(role)
    return f.diff() / f


def residual_terms(p: PairSpec) -> list[Expr]:
    """The summands of the defining residual (used for magnitude scaling)."""
    t = Var()
    if p.kind == "primal":
        G, W = p.expr("G"), p.expr("W")
        return [G.diff(), (_big_l_expr() + _logd(p, "w")) * G, -(G * G), -W]
    if p.kind == "dual":
        H, V = p.expr("H"), p.expr("V")
        return [-H.diff(), (_big_l_expr() - _logd(p, "v")) * H, -(H * H), -V]
    if p.kind == "bessel-potential":
        z, Z = p.expr("z"), p.expr("Z")
        return [z.diff().diff(), z.diff() / t, Const(p.constant) * Z * z]
    y = p.exprs.get("y")
    if y is None:
        raise ValueError("bessel-pair spec has no explicit y; use disconjugacy_check")
    X, Y = p.expr("X"), p.expr("Y")
    return [
        y.diff().diff(),
        ((Param("n") - 1.0) / t + _logd(p, "X")) * y.diff(),
        Const(p.constant) * Y / X * y,
    ]


def residual_expr(p: PairSpec) -> Expr:
    terms = residual_terms(p)
    acc = terms[0]
    for term in terms[1:]:
        acc = acc + term
    return acc


def riccati_residual(sf: SpaceForm, p: PairSpec, t):
    """G' + (L + w'/w) G - G^2 - W; the pair is admissible iff >= 0 on (0, R)."""
    p.require("primal")
    return residual_expr(p).evaluate(p.bindings(sf, t))


def dual_riccati_residual(sf: SpaceForm, p: PairSpec, t):
    """-H' + (L - v'/v) H - H^2 - V."""
    p.require("dual")
    return residual_expr(p).evaluate(p.bindings(sf, t))


def bessel_potential_residual(p: PairSpec, t):
    """z'' + z'/t + c Z z; the potential is verified iff identically 0."""
    p.require("bessel-potential")
    return residual_expr(p).evaluate(p.bindings(None, t))


def bessel_pair_residual(p: PairSpec, n: int, t):
    """y'' + ((n-1)/t + X'/X) y' + C Y/X y for a pair carrying an explicit y."""
    p.require("bessel-pair")
    b = p.bindings(None, t)
    b["n"] = float(n)
    return residual_expr(p).evaluate(b)


def _vH_prime(p: PairSpec) -> Expr:
    H, v = p.expr("H"), p.expr("v")
    if "v" in p.logd:
        return v * (p.logd["v"] * H + H.diff())
    return (v * H).diff()


def e1_expr(p: PairSpec) -> Expr:
    """(vH)' + vH (L - 2 ct): the side condition gating the radial-gradient bound."""
    H, v = p.expr("H"), p.expr("v")
    return _vH_prime(p) + v * H * (_big_l_expr() - 2.0 * _ct_expr())


def e2_expr(p: PairSpec) -> Expr:
    """2 (vH)' + vH (H - 2 ct): the side condition gating the full-gradient bound."""
    H, v = p.expr("H"), p.expr("v")
    return 2.0 * _vH_prime(p) + v * H * (H - 2.0 * _ct_expr())


def e1_terms(p: PairSpec) -> list[Expr]:
    H, v = p.expr("H"), p.expr("v")
    return [_vH_prime(p), v * H * _big_l_expr(), Const(-2.0) * v * H * _ct_expr()]


def e2_terms(p: PairSpec) -> list[Expr]:
    H, v = p.expr("H"), p.expr("v")
    return [Const(2.0) * _vH_prime(p), v * H * H, Const(-2.0) * v * H * _ct_expr()]


def e1(sf: SpaceForm, p: PairSpec, t):
    p.require("dual")
    return e1_expr(p).evaluate(p.bindings(sf, t))


def e2(sf: SpaceForm, p: PairSpec, t):
    p.require("dual")
    return e2_expr(p).evaluate(p.bindings(sf, t))


# ---------------------------------------------------------------------------
# primal <-> dual change of functions


def primal_to_dual(p: PairSpec, sf: SpaceForm) -> PairSpec:
    """H = L - G, v = w, V = W - (v'/v) L - L'.

    The change is an exact identity: the dual residual of the image equals
    the primal residual of p pointwise.
    """
    p.require("primal")
    G, w, W = p.expr("G"), p.expr("w"), p.expr("W")
    L = _big_l_expr()
    H = L - G
    V = W - _logd(p, "w") * L - L.diff()
    logd = {"v": p.logd["w"]} if "w" in p.logd else {}
    return PairSpec(kind="dual", exprs={"H": H, "v": w, "V": V},
                    params=dict(p.params), allow_signed_W=p.allow_signed_W,
                    note=p.note, logd=logd)


def dual_to_primal(p: PairSpec, sf: SpaceForm) -> PairSpec:
    """Inverse change: G = L - H, w = v, W = V + (w'/w) L + L'."""
    p.require("dual")
    H, v, V = p.expr("H"), p.expr("v"), p.expr("V")
    L = _big_l_expr()
    G = L - H
    W = V + _logd(p, "v") * L + L.diff()
    logd = {"w": p.logd["v"]} if "v" in p.logd else {}
    return PairSpec(kind="primal", exprs={"G": G, "w": v, "W": W},
                    params=dict(p.params), allow_signed_W=p.allow_signed_W,
                    note=p.note, logd=logd)


# ---------------------------------------------------------------------------
# Bessel constructions


def _check_verified(p: PairSpec, n: Optional[int] = None, tol: float = 1e-6,
                    t_range: tuple[float, float] = (1e-3, None)) -> None:
    R = float(p.params.get("R", 1.0))
    lo = t_range[0] * R
    hi = (t_range[1] or 0.999) * R
    grid = log_grid(lo, hi, 32)
    b = p.bindings(None, grid)
    if n is not None:
        b["n"] = float(n)
    res = residual_expr(p).evaluate(b)
    scale = _magnitude(p, b)
    worst = float(np.max(np.abs(res) / scale))
    if worst > tol:
        raise ValueError(
            f"input {p.kind} is not verified: relative residual {worst:.3e} > {tol:.0e}")


def _magnitude(p: PairSpec, bindings: dict):
    acc = 1.0
    for term in residual_terms(p):
        acc = acc + np.abs(term.evaluate(bindings))
    return acc


def from_bessel_potential(p: PairSpec, variant: str, n: int) -> PairSpec:
    """Construct the Riccati-side object generated by a verified potential.

    variant "i":   Bessel pair  y = z t^((2-n)/2), X = 1, Y = (n-2)^2/(4t^2) + c Z
    variant "ii":  primal pair  G = -z'/z + (n-2)/(2t), w = 1, W = (n-2)^2/(4t^2) + c Z
    variant "iii": dual pair    H = n/(2t) + z'/z,     v = 1, V = n^2/(4t^2) + c Z

    All three satisfy their defining relation with equality.
    """
    p.require("bessel-potential")
    _check_verified(p)
    t = Var()
    z, Z, c = p.expr("z"), p.expr("Z"), p.constant
    params = dict(p.params)
    if variant == "i":
        y = z * t ** Const((2.0 - n) / 2.0)
        Y = Const((n - 2) ** 2 / 4.0) / (t * t) + Const(c) * Z
        return PairSpec(kind="bessel-pair",
                        exprs={"y": y, "X": Const(1.0), "Y": Y},
                        constant=1.0, params=params, note=p.note)
    if variant == "ii":
        G = -(z.diff() / z) + Const((n - 2) / 2.0) / t
        W = Const((n - 2) ** 2 / 4.0) / (t * t) + Const(c) * Z
        return PairSpec(kind="primal", exprs={"G": G, "w": Const(1.0), "W": W},
                        params=params, note=p.note)
    if variant == "iii":
        H = Const(n / 2.0) / t + z.diff() / z
        V = Const(n ** 2 / 4.0) / (t * t) + Const(c) * Z
        return PairSpec(kind="dual", exprs={"H": H, "v": Const(1.0), "V": V},
                        params=params, note=p.note)
    raise ValueError(f"variant must be 'i', 'ii' or 'iii', got {variant!r}")


def from_bessel_pair(p: PairSpec, n: int) -> PairSpec:
    """Variant (iv): primal pair G = -y'/y, w = X, W = C Y/X, with equality."""
    p.require("bessel-pair")
    if "y" not in p.exprs:
        raise ValueError("bessel-pair spec carries no explicit y")
    _check_verified(p, n=n)
    y, X, Y = p.expr("y"), p.expr("X"), p.expr("Y")
    G = -(y.diff() / y)
    W = Const(p.constant) * Y / X
    return PairSpec(kind="primal", exprs={"G": G, "w": X, "W": W},
                    params=dict(p.params), note=p.note)


def bessel_pairs_from_potential(p: PairSpec, lam: float, n: int) -> tuple[PairSpec, PairSpec]:
    """The two Bessel pairs generated by a potential whose logarithmic
    derivative satisfies Z'/Z = -lam/t + f with f >= 0 and t f(t) -> 0:

      (1/t^2, (n-4)^2/(4t^4) + c Z/t^2)   with explicit  y = z t^(-(n-4)/2)
      (Z,     (n-lam-2)^2 Z/(4t^2))       certified via disconjugacy

    both with C = 1.  Raises if lam >= n-2 or the f >= 0 spot check fails.
    """
    p.require("bessel-potential")
    if lam >= n - 2:
        raise ValueError(f"need lambda < n-2, got lambda={lam}, n={n}")
    _check_verified(p)
    t = Var()
    z, Z, c = p.expr("z"), p.expr("Z"), p.constant
    # spot check f = Z'/Z + lam/t >= 0 (the decay of t f is the caller's assertion)
    R = float(p.params.get("R", 1.0))
    grid = log_grid(1e-4 * R, 0.99 * R, 64)
    f_expr = Z.diff() / Z + Const(lam) / t
    f_vals = f_expr.evaluate(p.bindings(None, grid))
    if np.min(f_vals) < -1e-9 * np.max(1.0 + np.abs(f_vals)):
        raise ValueError("condition Z'/Z = -lambda/t + f with f >= 0 fails on spot check")
    params = dict(p.params)
    first = PairSpec(
        kind="bessel-pair",
        exprs={
            "y": z * t ** Const(-(n - 4) / 2.0),
            "X": Const(1.0) / (t * t),
            "Y": Const((n - 4) ** 2 / 4.0) / (t * t * t * t) + Const(c) * Z / (t * t),
        },
        constant=1.0, params=params, note=p.note)
    second = PairSpec(
        kind="bessel-pair",
        exprs={
            "X": Z,
            "Y": Const((n - lam - 2) ** 2 / 4.0) * Z / (t * t),
        },
        constant=1.0, params=params, note=p.note)
    return first, second


# ---------------------------------------------------------------------------
# disconjugacy certificate


@dataclass(frozen=True)
class DisconjugacyReport:
    positive_solution: bool
    first_zero: Optional[float]
    status: str                    # "ok" | "inconclusive"
    t_start: float
    t_end: float
    log_t_first_zero: Optional[float] = None
    steps: int = 0


def _sspace_coefficients(p: PairSpec, n: Optional[int]):
    """Coefficient expressions a(s), b(s) of y_ss + a y_s + b y = 0 at t = e^s.

    For a potential, z'' + z'/t + cZz = 0 becomes z_ss + (c t^2 Z) z = 0.
    For a pair, y'' + ((n-1)/t + X'/X) y' + C Y/X y = 0 becomes
    y_ss + (n-2 + t X'/X) y_s + (C t^2 Y/X) y = 0.
    """
    t = Var()
    if p.kind == "bessel-potential":
        a = Const(0.0)
        b = Const(p.constant) * t * t * p.expr("Z")
    elif p.kind == "bessel-pair":
        if n is None:
            raise ValueError("bessel-pair disconjugacy needs the dimension n")
        X, Y = p.expr("X"), p.expr("Y")
        a = Const(float(n - 2)) + t * _logd(p, "X")
        b = Const(p.constant) * t * t * Y / X
    else:
        raise ValueError("disconjugacy_check applies to Bessel objects only")
    return a, b


_DEEP_LOG_DEPTH = 2.0e6          # potentials: start at t = R e^{-depth}
_PAIR_LOG_DEPTH = 110.0


def disconjugacy_check(p: PairSpec, interval: Optional[tuple[float, float]] = None,
                       n: Optional[int] = None, rtol: float = 1e-8,
                       max_steps: int = 20_000) -> DisconjugacyReport:
    """Integrate the defining linear ODE and report whether the solution
    with principal (recessive-at-zero) initial data stays positive.

    The integration runs in s = log t over mpmath numbers, starting deep
    near the singular endpoint (far below float range) so that the
    oscillation of super-critical potentials is actually visible.  Steps
    are RK4 with step-doubling error control, and the state is
    renormalized in flight, which is sign-safe for a linear equation.
    """
    import mpmath

    a_expr, b_expr = _sspace_coefficients(p, n)
    R = float(p.params.get("R", 1.0))
    if interval is not None:
        t0, t1 = interval
        if not (0 < t0 < t1):
            raise ValueError("interval must satisfy 0 < t0 < t1")
        s_lo, s_hi = math.log(t0), math.log(t1)
    else:
        depth = _DEEP_LOG_DEPTH if p.kind == "bessel-potential" else _PAIR_LOG_DEPTH
        s_hi = math.log(R) + math.log1p(-1e-9)
        s_lo = math.log(R) - depth
    base = dict(p.params)
    if n is not None:
        base["n"] = float(n)

    # float arithmetic when the start is shallow enough for float-range
    # expression trees; deep starts (and float failures) use mpmath
    if s_lo > -120.0:
        try:
            return _disconjugacy_run(p, a_expr, b_expr, base, s_lo, s_hi,
                                     rtol, max_steps, use_mp=False)
        except ex.EvaluationError:
            pass
    return _disconjugacy_run(p, a_expr, b_expr, base, s_lo, s_hi,
                             rtol, max_steps, use_mp=True)


def _disconjugacy_run(p, a_expr, b_expr, base, s_lo, s_hi, rtol, max_steps,
                      use_mp: bool) -> DisconjugacyReport:
    import mpmath

    if use_mp:
        mpmath.mp.dps = 25
        mpf = mpmath.mpf
        exp_fn = mpmath.exp
    else:
        mpf = float
        exp_fn = math.exp

    def coeffs(s):
        t = exp_fn(s)
        b = dict(base, t=t)
        return a_expr.evaluate(b), b_expr.evaluate(b)

    def rk4(s, y, dy, h):
        def f(s_, y_, dy_):
            a_, b_ = coeffs(s_)
            return dy_, -a_ * dy_ - b_ * y_

        k1 = f(s, y, dy)
        k2 = f(s + h / 2, y + h / 2 * k1[0], dy + h / 2 * k1[1])
        k3 = f(s + h / 2, y + h / 2 * k2[0], dy + h / 2 * k2[1])
        k4 = f(s + h, y + h * k3[0], dy + h * k3[1])
        return (y + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                dy + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))

    y, dy = mpf(1), mpf(0)
    s = mpf(s_lo)
    s_end = mpf(s_hi)
    end_tol = 1e-9 * max(1.0, abs(s_hi))
    h = mpf(min(1.0, s_hi - s_lo))
    first_zero_s = None
    steps = 0
    status = "ok"
    while float(s_end - s) > end_tol:
        if steps >= max_steps:
            status = "inconclusive"
            break
        h = min(h, s_end - s)
        try:
            y_full, dy_full = rk4(s, y, dy, h)
            y_half, dy_half = rk4(s, y, dy, h / 2)
            y2, dy2 = rk4(s + h / 2, y_half, dy_half, h / 2)
        except (ex.EvaluationError, ZeroDivisionError):
            if not use_mp:
                raise  # retried with mpmath by the caller
            status = "inconclusive"
            break
        norm = max(abs(y2), abs(dy2), mpf(1e-300))
        err = float(max(abs(y2 - y_full), abs(dy2 - dy_full)) / norm)
        if err > rtol:
            if float(h) > 1e-12 * max(1.0, abs(float(s))):
                h = h * max(0.2, 0.9 * (rtol / err) ** 0.2)
                steps += 1
                continue
            if err > 100.0 * rtol:   # step underflow: stiff failure
                status = "inconclusive"
                break
        y_new, dy_new = y2, dy2
        if y_new == 0 or (y < 0) != (y_new < 0):
            # bisect the in-step sign change on re-integrated substeps
            lo_s, hi_s = s, s + h
            y_lo, dy_lo = y, dy
            for _ in range(40):
                mid = (lo_s + hi_s) / 2
                try:
                    y_mid, dy_mid = rk4(lo_s, y_lo, dy_lo, mid - lo_s)
                except (ex.EvaluationError, ZeroDivisionError):
                    break
                if y_mid == 0 or (y_lo < 0) != (y_mid < 0):
                    hi_s = mid
                else:
                    lo_s, y_lo, dy_lo = mid, y_mid, dy_mid
                if float(hi_s - lo_s) < 1e-9 * max(1.0, abs(float(hi_s))):
                    break
            first_zero_s = float((lo_s + hi_s) / 2)
            steps += 1
            break
        y, dy, s = y_new, dy_new, s + h
        steps += 1
        if err > 0:
            h = h * min(5.0, 0.9 * (rtol / err) ** 0.2)
        else:
            h = h * 5.0
        m = max(abs(y), abs(dy))
        if m > mpf("1e80") or m < mpf("1e-80"):
            y, dy = y / m, dy / m

    t_start = math.exp(max(s_lo, -745.0))
    t_end = math.exp(min(s_hi, 709.0))
    if first_zero_s is not None:
        t_zero = math.exp(first_zero_s) if first_zero_s > -745.0 else 0.0
        return DisconjugacyReport(False, t_zero, "ok", t_start, t_end,
                                  log_t_first_zero=first_zero_s, steps=steps)
    positive = status == "ok"
    return DisconjugacyReport(positive, None, status, t_start, t_end, steps=steps)


# ---------------------------------------------------------------------------
# positivity scanning


@dataclass(frozen=True)
class PositivityReport:
    min_value: float
    argmin: float
    sign_changes: tuple            # refined brackets (t1, t2) with f(t1) f(t2) < 0
    boundary_limit_0: Optional[float]
    boundary_limit_R: Optional[float]
    verdict: str                   # "nonnegative" | "violated" | "inconclusive-near-boundary"
    grid_size: int
    tol: float


def _richardson_limit(f: Callable[[float], float], points: Sequence[float]):
    """Extrapolate f along a geometrically converging sequence of points."""
    vals = []
    for t in points:
        try:
            vals.append(float(f(t)))
        except ex.EvaluationError:
            return None
    if any(math.isnan(v) or math.isinf(v) for v in vals):
        return None
    # detect divergence: magnitudes growing geometrically
    mags = [abs(v) for v in vals]
    if mags[-1] > 100.0 * (1.0 + mags[0]) and mags[-1] > 2.0 * mags[-2] > 0:
        return math.copysign(math.inf, vals[-1])
    table = list(vals)
    for order in range(1, len(vals)):
        fac = 2.0 ** order
        table = [(fac * table[i + 1] - table[i]) / (fac - 1.0) for i in range(len(table) - 1)]
    return table[0]


def scan_positivity(f, sf: SpaceForm, grid: int = 10_000, refine: int = 60,
                    t_lo: Optional[float] = None, t_hi: Optional[float] = None,
                    bindings: Optional[dict] = None,
                    tol: float = 1e-11) -> PositivityReport:
    """Scan f >= 0 on a log-spaced grid over (0, R), refine sign changes by
    bisection, and extrapolate the boundary limits.

    The verdict is sound, not complete: "violated" always exhibits a strictly
    negative sample; "nonnegative" means no sample fell below -tol*scale and
    the t -> R limit does not look negative.
    """
    r_tilde = min(sf.R, 1e3)
    lo = t_lo if t_lo is not None else 1e-6 * r_tilde
    hi = t_hi if t_hi is not None else r_tilde
    b = dict(bindings or {})
    b.setdefault("n", float(sf.n))
    b.setdefault("kappa", float(sf.kappa))
    fn = ex.as_callable(f, b)

    ts = log_grid(lo, hi, grid)
    if isinstance(f, Expr):
        vals = np.broadcast_to(
            np.asarray(f.evaluate({**b, "t": ts}), dtype=float), ts.shape)
    else:
        vals = np.asarray([float(fn(t)) for t in ts])
    i_min = int(np.nanargmin(vals))
    min_value, argmin = float(vals[i_min]), float(ts[i_min])
    # violation tolerance is local: a sample counts as negative only when it
    # clears tol relative to its own magnitude (cancellation noise does not)
    violated = bool(np.any(vals < -tol * (1.0 + np.abs(vals))))

    brackets = []
    flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    for i in flips[:16]:
        a_, b_ = float(ts[i]), float(ts[i + 1])
        fa = float(vals[i])
        for _ in range(refine):
            m = 0.5 * (a_ + b_)
            fm = float(fn(m))
            if fm == 0.0:
                break  # keep the last strict bracket
            if fa * fm < 0:
                b_ = m
            else:
                a_, fa = m, fm
        brackets.append((a_, b_))

    limit_R = None
    if math.isfinite(sf.R):
        pts = [sf.R * (1.0 - 2.0 ** (-j)) for j in range(6, 14)]
        limit_R = _richardson_limit(fn, pts)
    pts0 = [lo * 2.0 ** (-j) for j in range(0, 8)]
    limit_0 = _richardson_limit(fn, pts0)

    if violated:
        verdict = "violated"
    elif limit_R is not None and limit_R < -1e-6 * (1.0 + abs(limit_R)):
        verdict = "inconclusive-near-boundary"
    else:
        verdict = "nonnegative"
    return PositivityReport(min_value, argmin, tuple(brackets), limit_0, limit_R,
                            verdict, grid, tol)


# ---------------------------------------------------------------------------
# residual reports


@dataclass(frozen=True)
class ResidualReport:
    kind: str
    grid_min: float
    grid_min_at: float
    max_abs_relative: float
    equality: bool                 # max relative |residual| <= tol over the grid
    nonnegative: bool              # min relative residual >= -tol
    grid_size: int
    tol: float
    residual: Optional[Expr] = None  # the evaluated residual expression


def relative_report(terms: Sequence[Expr], bindings: dict, kind: str = "terms",
                    grid: int = 10_000, t_lo: float = 1e-6, t_hi: float = 1e3,
                    tol: float = DEFAULT_RESIDUAL_TOL) -> ResidualReport:
    """Evaluate sum(terms) on a log grid relative to the local magnitude
    max(1, sum |term_i|); exact cancellations then register as zero instead
    of as rounding noise."""
    ts = log_grid(t_lo, t_hi, grid)
    b = dict(bindings, t=ts)
    total = None
    handle = None
    scale = np.ones_like(ts)
    for term in terms:
        v = np.broadcast_to(np.asarray(term.evaluate(b), dtype=float), ts.shape)
        total = v if total is None else total + v
        handle = term if handle is None else handle + term
        scale = scale + np.abs(v)
    rel = total / scale
    i = int(np.argmin(rel))
    return ResidualReport(
        kind=kind,
        grid_min=float(total[i]),
        grid_min_at=float(ts[i]),
        max_abs_relative=float(np.max(np.abs(rel))),
        equality=bool(np.max(np.abs(rel)) <= tol),
        nonnegative=bool(np.min(rel) >= -tol),
        grid_size=grid,
        tol=tol,
        residual=handle,
    )


def residual_report(p: PairSpec, sf: Optional[SpaceForm] = None,
                    grid: int = 10_000, t_lo: float = 1e-6, t_hi: float = 1e3,
                    n: Optional[int] = None,
                    tol: float = DEFAULT_RESIDUAL_TOL) -> ResidualReport:
    """Evaluate the defining residual on a log grid, relative to the local
    magnitude max(1, sum |terms|)."""
    b = p.bindings(sf)
    if n is not None:
        b["n"] = float(n)
    return relative_report(residual_terms(p), b, kind=p.kind, grid=grid,
                           t_lo=t_lo, t_hi=t_hi, tol=tol)


# ---------------------------------------------------------------------------
# root criterion from the iterated-log positivity argument


class PolynomialRoots(NamedTuple):
    q_minus: float
    q_plus: float


def positivity_polynomial_roots(n: int) -> PolynomialRoots:
    """Roots q = (n-4)/2 -+ sqrt(3n^2-16n+14)/2 of -q^2+(n-4)q+(n^2-4n-1)/2."""
    if n < 5:
        raise ValueError("need n >= 5")
    disc = 3 * n * n - 16 * n + 14
    assert disc > 0, "discriminant is positive for all n >= 5"
    root = math.sqrt(disc) / 2.0
    mid = (n - 4) / 2.0
    return PolynomialRoots(mid - root, mid + root)


def polynomial_criterion_holds(n: int) -> bool:
    """q_minus <= -1 < 0 < q_plus, i.e. the polynomial is >= 0 on (-1, 0)."""
    q = positivity_polynomial_roots(n)
    return q.q_minus <= -1.0 < 0.0 < q.q_plus
