"""Mean-field fixed points, phase region and rate functions for the ERGM.

For a pattern with ``e`` edges and ``alpha`` automorphisms the mean-field map
is ``psi(u) = 2 e phi(u)^{e-1} - alpha u``, with ``phi(u)`` the logistic
function of ``beta u + h``. For the triangle (``e = 3, alpha = 6``) the fast
path uses the equivalent ``phi(u)^2 - u``. Every function takes an optional
``spec`` (anything with ``e`` and ``alpha`` attributes, such as
:class:`steinlab.ergm.SubgraphSpec`); ``None`` means the triangle.

Root finding is exact in structure. ``psi''`` vanishes only where
``phi = (e-1)/e``, so ``psi'`` is unimodal. Its zeros split the domain into
at most three pieces on which ``psi`` is monotone, and each piece is
bisected. Double and triple roots show up as critical points where ``psi``
itself vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

ROOT_ZERO_TOL = 1e-12
DOUBLE_TOL = 1e-6
TRIPLE_TOL = 1e-4
BOUNDARY_BAND = 1e-6
A_MAX = 1e6


class LowTemperatureError(ValueError):
    """Raised where the fixed-point equation has several stable solutions."""


@dataclass(frozen=True)
class _Pattern:
    e: int
    alpha: int


TRIANGLE = _Pattern(3, 6)


def _pat(spec) -> _Pattern:
    return TRIANGLE if spec is None else _Pattern(int(spec.e), int(spec.alpha))


def _logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def phi(u, beta: float, h: float):
    """``exp(beta u + h) / (1 + exp(beta u + h))``."""
    if not isinstance(u, (float, int)) and np.ndim(u):
        from scipy.special import expit

        return expit(beta * np.asarray(u, dtype=float) + h)
    return _logistic(beta * u + h)


# ---------------------------------------------------------------- psi and derivatives


def u_max(spec=None) -> float:
    """Upper end of the range of ``L``: ``2 e / alpha`` (1 for the triangle)."""
    p = _pat(spec)
    return 2 * p.e / p.alpha


def psi(u: float, beta: float, h: float, spec=None) -> float:
    """Triangle: ``phi(u)^2 - u``. General: ``2 e phi^{e-1} - alpha u``."""
    f = phi(u, beta, h)
    if spec is None:
        return f * f - u
    p = _pat(spec)
    return 2 * p.e * f ** (p.e - 1) - p.alpha * u


def psi_prime(u: float, beta: float, h: float, spec=None) -> float:
    f = phi(u, beta, h)
    if spec is None:
        return 2 * beta * f * f * (1 - f) - 1
    p = _pat(spec)
    return 2 * p.e * (p.e - 1) * beta * f ** (p.e - 1) * (1 - f) - p.alpha


def psi_second(u: float, beta: float, h: float, spec=None) -> float:
    f = phi(u, beta, h)
    if spec is None:
        return 2 * beta * beta * f * f * (1 - f) * (2 - 3 * f)
    p = _pat(spec)
    return 2 * p.e * (p.e - 1) * beta**2 * f ** (p.e - 1) * (1 - f) * ((p.e - 1) - p.e * f)


def _normalized(fn, u, beta, h, spec):
    # the general psi scaled by 1/alpha, so tolerances mean the same for every pattern
    v = fn(u, beta, h, spec)
    return v if spec is None else v / _pat(spec).alpha


def _scalar_fns(beta: float, h: float, spec):
    """Fast scalar ``psi / alpha`` and ``psi' / alpha`` for the root finder."""
    p = _pat(spec)
    c = 2 * p.e / p.alpha
    e1 = p.e - 1
    exp = math.exp

    def f(u):
        z = beta * u + h
        if z >= 0:
            return 1.0 / (1.0 + exp(-z))
        ez = exp(z)
        return ez / (1.0 + ez)

    def g(u):
        return c * f(u) ** e1 - u

    def dg(u):
        v = f(u)
        return c * e1 * beta * v**e1 * (1 - v) - 1

    return g, dg


def _bisect(fn, lo: float, hi: float, flo: float) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = fn(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _zeros_on_pieces(fn, knots: list[float], zero_tol: float) -> tuple[list[float], dict]:
    """Zeros of ``fn`` given that it is monotone between consecutive knots.

    Knot values within ``zero_tol`` of zero count as exact zeros.
    """
    vals = {}
    for x in knots:
        v = fn(x)
        vals[x] = 0.0 if abs(v) <= zero_tol else v
    out = [x for x in knots if vals[x] == 0.0]
    for a, b in zip(knots, knots[1:]):
        fa, fb = vals[a], vals[b]
        if fa != 0 and fb != 0 and (fa > 0) != (fb > 0):
            out.append(_bisect(fn, a, b, fa))
    return sorted(out), vals


@dataclass(frozen=True)
class Root:
    u: float
    dpsi: float
    multiplicity: str


@dataclass
class FixedPointReport:
    """All zeros of ``psi`` on ``[0, u_max]``.

    ``u_star`` is the unique root or, on the boundary, the simple root.
    With three roots it is the root maximising the free-energy objective.
    ``dpsi`` uses the requested normalisation (triangle fast path or
    ``2 e phi^{e-1} - alpha u``).
    """

    roots: list[Root]
    u_star: float
    in_region_S: bool
    beta: float
    h: float
    thresholds: dict = field(default_factory=lambda: {
        "zero": ROOT_ZERO_TOL, "double": DOUBLE_TOL, "triple": TRIPLE_TOL})

    @property
    def values(self) -> list[float]:
        return [r.u for r in self.roots]


def critical_points(beta: float, h: float, spec=None) -> list[float]:
    """Zeros of ``psi'`` in ``[0, u_max]``."""
    if beta == 0:
        return []
    p = _pat(spec)
    top = u_max(spec)
    knots = [0.0, top]
    # psi'' vanishes only where phi = (e-1)/e
    u2 = (logit((p.e - 1) / p.e) - h) / beta
    if 0 < u2 < top:
        knots = [0.0, u2, top]
    zeros, _ = _zeros_on_pieces(_scalar_fns(beta, h, spec)[1], knots, ROOT_ZERO_TOL)
    return [z for z in zeros if 0 < z < top]


def psi_roots(beta: float, h: float, spec=None) -> FixedPointReport:
    """Find and classify every root of ``psi``."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    top = u_max(spec)
    knots = sorted({0.0, top, *critical_points(beta, h, spec)})
    zeros, _ = _zeros_on_pieces(_scalar_fns(beta, h, spec)[0], knots, ROOT_ZERO_TOL)
    roots = []
    for z in zeros:
        d1 = _normalized(psi_prime, z, beta, h, spec)
        d2 = _normalized(psi_second, z, beta, h, spec)
        if abs(d1) < DOUBLE_TOL:
            mult = "triple" if abs(d2) < TRIPLE_TOL else "double"
        else:
            mult = "simple"
        roots.append(Root(z, psi_prime(z, beta, h, spec), mult))
    if not roots:
        raise ArithmeticError("psi has no root; sign conditions violated")
    simple = [r for r in roots if r.multiplicity == "simple"]
    if len(roots) == 1:
        u_star = roots[0].u
    elif len(simple) == 1:
        u_star = simple[0].u
    else:
        u_star = max((r.u for r in roots), key=lambda u: fixed_point_objective(u, beta, h, spec))
    in_s = len(roots) == 1 and roots[0].multiplicity == "simple"
    return FixedPointReport(roots, u_star, in_s, beta, h)


# ---------------------------------------------------------------- phase region


def h0(spec=None) -> float:
    """``log(e-1) - e/(e-1)``; ``log 2 - 3/2`` for the triangle."""
    e = _pat(spec).e
    return math.log(e - 1) - e / (e - 1)


def p0(spec=None) -> float:
    """``(e-1) / (e-1 + exp(e/(e-1)))``; ``2 / (2 + e^{3/2})`` for the triangle."""
    e = _pat(spec).e
    return (e - 1) / (e - 1 + math.exp(e / (e - 1)))


def a_pivot(spec=None) -> float:
    return 1.0 / (_pat(spec).e - 1)


def h_of_a(a: float, spec=None) -> float:
    """``-log a - (1+a)/((e-1) a)``, the field coordinate of the phase curve."""
    e = _pat(spec).e
    return -math.log(a) - (1 + a) / ((e - 1) * a)


def beta_of_a(a: float, spec=None) -> float:
    """``alpha (1+a)^e / (2 e (e-1) a)``; ``(1+a)^3/(2a)`` for the triangle."""
    p = _pat(spec)
    return p.alpha * (1 + a) ** p.e / (2 * p.e * (p.e - 1) * a)


def a_roots(h: float, spec=None) -> tuple[float, float] | None:
    """Both solutions ``a_* <= pivot <= a^*`` of ``h_of_a(a) = h``, or ``None`` above ``h0``."""
    pat = _pat(spec)
    return _a_roots_cached(float(h), pat.e, pat.alpha)


@lru_cache(maxsize=4096)
def _a_roots_cached(h: float, e: int, alpha: int) -> tuple[float, float] | None:
    spec = None if (e, alpha) == (3, 6) else _Pattern(e, alpha)
    if h > h0(spec):
        return None
    piv = a_pivot(spec)
    if h == h0(spec):
        return piv, piv
    g = lambda a: h_of_a(a, spec) - h  # noqa: E731
    lo = piv
    while g(lo) > 0:
        lo /= 2
    a_lo = _bisect(g, lo, piv, g(lo))
    hi = piv
    while g(hi) > 0 and hi < A_MAX:
        hi = min(2 * hi, A_MAX)
    if g(hi) > 0:
        raise ArithmeticError("upper a-root beyond the search range")
    a_hi = _bisect(lambda a: -g(a), piv, hi, -g(piv))
    return a_lo, a_hi


@dataclass(frozen=True)
class PhasePoint:
    h: float
    beta: float
    h0: float
    a_star: float | None = None
    a_upper_star: float | None = None
    beta_star: float | None = None
    beta_upper_star: float | None = None


def phase_point(beta: float, h: float, spec=None) -> PhasePoint:
    roots = a_roots(h, spec)
    if roots is None:
        return PhasePoint(h, beta, h0(spec))
    a_lo, a_hi = roots
    b1, b2 = sorted((beta_of_a(a_lo, spec), beta_of_a(a_hi, spec)))
    return PhasePoint(h, beta, h0(spec), a_lo, a_hi, b1, b2)


def beta_bounds(h: float, spec=None) -> tuple[float, float] | None:
    """``(beta_*(h), beta^*(h))`` for ``h <= h0``, else ``None``."""
    pt = phase_point(0.0, h, spec)
    return None if pt.beta_star is None else (pt.beta_star, pt.beta_upper_star)


@dataclass(frozen=True)
class RegionReport:
    in_S: bool
    closed_form: bool
    numeric: bool
    boundary: bool


def region_S_membership(beta: float, h: float, spec=None) -> RegionReport:
    """Classify ``(h, beta)`` by the closed-form characterisation and by roots.

    ``in_S`` reports the closed form. ``boundary`` flags points within
    ``1e-6`` of the curve ``beta in {beta_*, beta^*}`` or where the two
    classifiers disagree.
    """
    bounds = beta_bounds(h, spec)
    if bounds is None:
        closed = True
        near = abs(h - h0(spec)) < BOUNDARY_BAND and abs(beta - beta_of_a(a_pivot(spec), spec)) < BOUNDARY_BAND
    else:
        lo, hi = bounds
        closed = not (lo <= beta <= hi)
        near = min(abs(beta - lo), abs(beta - hi)) < BOUNDARY_BAND
    numeric = psi_roots(beta, h, spec).in_region_S
    return RegionReport(closed, closed, numeric, near or closed != numeric)


def phase_curve(t: float, spec=None) -> tuple[float, float]:
    """``gamma(t) = (h_of_a(t), beta_of_a(t))``; ``t = 1/(e-1)`` is the critical point."""
    if t <= 0:
        raise ValueError("t must be positive")
    return h_of_a(t, spec), beta_of_a(t, spec)


def inflection_root(t: float, spec=None) -> float:
    """``v* = (2e/alpha)(1+t)^{-(e-1)}``; ``(1+t)^{-2}`` for the triangle."""
    p = _pat(spec)
    return 2 * p.e / p.alpha * (1 + t) ** (-(p.e - 1))


def boundary_roots(t: float, spec=None) -> tuple[float, float]:
    """``(u*, v*)`` at ``gamma(t)``: the non-inflection root and the inflection root."""
    h, beta = phase_curve(t, spec)
    v = inflection_root(t, spec)
    rep = psi_roots(beta, h, spec)
    others = [r for r in rep.values if abs(r - v) > 1e-5]
    u = max(others, key=lambda r: abs(r - v)) if others else v
    return u, v


# ---------------------------------------------------------------- rates and energies


def kl_rate(r: float, s: float) -> float:
    """``I(r, s) = r log(r/s) + (1-r) log((1-r)/(1-s))`` with ``0 log 0 = 0``."""
    if not (0 <= r <= 1 and 0 <= s <= 1):
        raise ValueError("r and s must lie in [0, 1]")

    def term(a, b):
        if a == 0:
            return 0.0
        if b == 0:
            return math.inf
        return a * math.log(a / b)

    return term(r, s) + term(1 - r, 1 - s)


def energy(r, beta: float, p: float, spec=None):
    """``e(r) = I(r,p)/2 + log(1-p)/2 - beta r^e / alpha``."""
    pat = _pat(spec)
    if np.ndim(r):
        return np.array([energy(float(x), beta, p, spec) for x in np.asarray(r).ravel()]).reshape(np.shape(r))
    return 0.5 * kl_rate(r, p) + 0.5 * math.log1p(-p) - beta * r**pat.e / pat.alpha


def energy_prime(r: float, beta: float, p: float, spec=None) -> float:
    """``e'(r) = (logit r - logit p)/2 - beta e r^{e-1} / alpha``."""
    pat = _pat(spec)
    return 0.5 * (logit(r) - logit(p)) - beta * pat.e * r ** (pat.e - 1) / pat.alpha


def r_to_u(r: float, spec=None) -> float:
    """``u = (2e/alpha) r^{e-1}``; ``r^2`` for the triangle."""
    p = _pat(spec)
    return 2 * p.e / p.alpha * r ** (p.e - 1)


def rate_stationarity_check(r, beta: float, p: float, spec=None, step: float = 1e-6,
                            tol: float = 1e-9) -> bool:
    """``sign e'(r) = -sign psi(u(r))`` at every grid point (finite differences).

    Points where either side is within ``tol`` of zero are skipped.
    """
    h = logit(p)
    for x in np.atleast_1d(np.asarray(r, dtype=float)):
        d = (energy(x + step, beta, p, spec) - energy(x - step, beta, p, spec)) / (2 * step)
        ps = psi(r_to_u(x, spec), beta, h, spec)
        if abs(d) <= tol or abs(ps) <= tol:
            continue
        if (d > 0) == (ps > 0):
            return False
    return True


def fixed_point_objective(u: float, beta: float, h: float, spec=None) -> float:
    """``-I(phi(u), phi(0))/2 - log(1 - phi(0))/2 + beta phi(u)^e / alpha``."""
    pat = _pat(spec)
    f = phi(u, beta, h)
    f0 = phi(0.0, beta, h)
    return -0.5 * kl_rate(f, f0) - 0.5 * math.log1p(-f0) + beta * f**pat.e / pat.alpha


def free_energy_limit(beta: float, h: float, spec=None) -> float:
    """Limit of ``log Z_n / n^2`` in the high-temperature region and on its boundary."""
    rep = psi_roots(beta, h, spec)
    simple = [r for r in rep.roots if r.multiplicity == "simple"]
    if len(rep.roots) > 1 and len(simple) != 1:
        raise LowTemperatureError(f"(h, beta) = ({h}, {beta}) lies inside the low-temperature regime")
    return fixed_point_objective(rep.u_star, beta, h, spec)


@dataclass(frozen=True)
class RateResult:
    rate: float
    beta: float
    h: float
    admissible: bool


def ld_rate(p: float, r: float, spec=None) -> RateResult:
    """Tilting parameters for the upper-tail event with edge density ``r``.

    ``h = logit p`` and ``beta`` solves ``phi(u(r)) = r``. The rate is
    ``I(r,p)/2`` per ``n^2``; ``admissible`` requires ``(h, beta)`` in the
    high-temperature region with ``u*`` equal to ``u(r)``. ``r = 1`` is the
    ``beta = inf`` limit and always admissible.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if r < p or r > 1:
        raise ValueError("need p <= r <= 1")
    h = logit(p)
    rate = 0.5 * kl_rate(r, p)
    if r == 1:
        return RateResult(rate, math.inf, h, True)
    u = r_to_u(r, spec)
    beta = (logit(r) - h) / u
    if r == p:
        beta = 0.0
    region = region_S_membership(beta, h, spec)
    rep = psi_roots(beta, h, spec)
    admissible = region.in_S and rep.in_region_S and abs(rep.u_star - u) <= 1e-9
    return RateResult(rate, beta, h, admissible)


@dataclass(frozen=True)
class AdmissibleInterval:
    full: bool
    p_prime: float | None = None
    p_doubleprime: float | None = None


def admissible_r_interval(p: float, spec=None) -> AdmissibleInterval:
    """Gap ``[p', p'']`` of inadmissible densities when ``p <= p0``.

    ``p' = phi(u)`` at the simple (lower) root for ``beta_*(h)``, and
    ``p'' = phi(u)`` at the simple (upper) root for ``beta^*(h)``, with
    ``h = logit p``.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    h = logit(p)
    bounds = beta_bounds(h, spec)
    if bounds is None or bounds[0] == bounds[1]:
        return AdmissibleInterval(True)
    b_lo, b_hi = bounds
    low = min(psi_roots(b_lo, h, spec).values)
    high = max(psi_roots(b_hi, h, spec).values)
    return AdmissibleInterval(False, phi(low, b_lo, h), phi(high, b_hi, h))
