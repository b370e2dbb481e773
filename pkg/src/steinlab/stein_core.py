"""Exchangeable-pair bounds and the checks that compare them to model output.

A model module produces :class:`PairSample` records: one step of a reversible
heat-bath kernel started at stationarity gives an exchangeable pair
``(X, X')``, an antisymmetric ``F(X, X')``, ``f(X) = E[F | X]`` and the exact
conditional quantity ``Delta(X) = 1/2 E[|(f(X) - f(X')) F(X, X')| | X]``.

Everything here is a pure function of its inputs. Functions accepting
``weights`` treat the sample list as an exact enumeration of the stationary
pair law (weight = mu(x) K(x, x')); without weights the samples are Monte
Carlo draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.special import logsumexp, softmax

EXACT_TOL = 1e-12
CI_LEVEL = 0.99
Z_99 = 2.5758293035489004  # two-sided 99% normal quantile


@dataclass(frozen=True)
class PairSample:
    x: Any
    x_prime: Any
    f_x: float
    f_x_prime: float
    big_f: float
    delta_x: float

    def __post_init__(self) -> None:
        if self.delta_x < 0:
            raise ValueError(f"delta_x must be nonnegative, got {self.delta_x}")


@dataclass(frozen=True)
class PsiBoundSpec:
    """A dominating function ``psi`` with ``Delta(X) <= psi(f(X))``.

    ``kind`` is ``"linear"`` (``B f + C``), ``"power"`` (``B |f|^alpha + C``)
    or ``"tabulated"`` (piecewise-linear in ``|f|`` through ``table``).
    ``c`` is the tail prefactor; it is reported, not asserted.
    """

    kind: str
    B: float = 0.0
    C: float = 0.0
    alpha: float = 1.0
    c: float = 1.0
    table: tuple[tuple[float, float], ...] | None = None
    once_differentiable: bool = False

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "power", "tabulated"):
            raise ValueError(f"unknown psi kind {self.kind!r}")
        if self.c <= 0:
            raise ValueError("prefactor c must be positive")
        if self.B < 0 or self.C < 0:
            raise ValueError("B and C must be nonnegative")
        if self.kind == "power":
            if not 0 < self.alpha < 2:
                raise ValueError("power psi needs 0 < alpha < 2")
            if self.B <= 0:
                raise ValueError("power psi needs B > 0")
        if self.kind == "tabulated":
            if not self.table or len(self.table) < 2:
                raise ValueError("tabulated psi needs at least two (x, psi) points")
            xs = [p[0] for p in self.table]
            ys = [p[1] for p in self.table]
            if xs[0] != 0 or any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("table abscissae must start at 0 and increase")
            if any(y < 0 for y in ys) or any(b < a for a, b in zip(ys, ys[1:])):
                raise ValueError("tabulated psi must be nonnegative and nondecreasing")

    def __call__(self, x):
        ax = np.abs(np.asarray(x, dtype=float))
        if self.kind == "linear":
            out = self.B * ax + self.C
        elif self.kind == "power":
            out = self.B * ax**self.alpha + self.C
        else:
            xs = np.array([p[0] for p in self.table])
            ys = np.array([p[1] for p in self.table])
            # beyond the last knot extend with the last slope
            slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
            out = np.where(ax <= xs[-1], np.interp(ax, xs, ys), ys[-1] + slope * (ax - xs[-1]))
        return float(out) if np.ndim(out) == 0 else out


def clamp_probability(p: float) -> float:
    return min(1.0, p)


def gaussian_tail_bound(t: float, B: float, C: float, side: str = "upper") -> float:
    """Tail bound from ``Delta <= B f + C``.

    Upper side ``exp(-t^2 / (2C + 2Bt))``, lower side ``exp(-t^2 / (2C))``.
    A zero denominator with ``t > 0`` gives the limiting value 0.
    """
    if t < 0 or B < 0 or C < 0:
        raise ValueError("t, B and C must be nonnegative")
    if side not in ("upper", "lower"):
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    denom = 2 * C + 2 * B * t if side == "upper" else 2 * C
    if t == 0:
        return 1.0
    if denom == 0:
        return 0.0
    return math.exp(-t * t / denom)


def psi_tail_bound(t: float, spec: PsiBoundSpec) -> float:
    """Raw bound ``c exp(-t^2 / (2 psi(t)))`` on ``P(|f(X)| > t)``.

    The exponent denominator is ``4 psi(t)`` when ``spec.once_differentiable``.
    The value is not clamped; use :func:`clamp_probability` for reporting.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return spec.c
    p = spec(t)
    if p == 0:
        return 0.0
    k = 4.0 if spec.once_differentiable else 2.0
    return spec.c * math.exp(-t * t / (k * p))


def _arrays(samples: Sequence[PairSample]):
    f = np.fromiter((s.f_x for s in samples), float, len(samples))
    fp = np.fromiter((s.f_x_prime for s in samples), float, len(samples))
    big = np.fromiter((s.big_f for s in samples), float, len(samples))
    dl = np.fromiter((s.delta_x for s in samples), float, len(samples))
    return f, fp, big, dl


def _weights(samples, weights):
    if weights is None:
        return None
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(samples),):
        raise ValueError("weights must match the number of samples")
    return w / w.sum()


def stationary_mean(samples: Sequence[PairSample], weights=None) -> float:
    """``E f(X)``; zero for every valid pair construction."""
    if not samples:
        raise ValueError("empty sample")
    f, _, _, _ = _arrays(samples)
    w = _weights(samples, weights)
    return float(f.mean() if w is None else w @ f)


def variance_identity_residual(samples: Sequence[PairSample], weights=None) -> float:
    """``|var f(X) - 1/2 E[(f(X) - f(X')) F(X, X')]|``."""
    if not samples:
        raise ValueError("empty sample")
    f, fp, big, _ = _arrays(samples)
    w = _weights(samples, weights)
    if w is None:
        if len(samples) < 2:
            raise ValueError("need at least two Monte Carlo samples")
        var = f.var()
        half = 0.5 * np.mean((f - fp) * big)
    else:
        mean = w @ f
        var = w @ (f - mean) ** 2
        half = 0.5 * (w @ ((f - fp) * big))
    return float(abs(var - half))


@dataclass(frozen=True)
class BdgReport:
    k: int
    lhs: float
    rhs: float
    holds_within_ci: bool
    lhs_se: float = 0.0
    rhs_se: float = 0.0
    ci_level: float = CI_LEVEL
    exact: bool = False


def bdg_moment_check(samples: Sequence[PairSample], k: int, weights=None) -> BdgReport:
    """Compare ``E f^{2k}`` with ``(2k-1)^k E Delta^k``.

    With weights the comparison is exact (tolerance 1e-12). Otherwise each
    moment gets a two-sided 99% normal band and the check passes when the
    bands are compatible with ``lhs <= rhs``.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if not samples:
        raise ValueError("empty sample")
    f, _, _, dl = _arrays(samples)
    a = f ** (2 * k)
    b = (2 * k - 1) ** k * dl**k
    w = _weights(samples, weights)
    if w is not None:
        lhs, rhs = float(w @ a), float(w @ b)
        return BdgReport(k, lhs, rhs, lhs <= rhs + EXACT_TOL, exact=True)
    m = len(samples)
    lhs, rhs = float(a.mean()), float(b.mean())
    se_l = float(a.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    se_r = float(b.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    holds = lhs - Z_99 * se_l <= rhs + Z_99 * se_r
    return BdgReport(k, lhs, rhs, holds, se_l, se_r)


@dataclass(frozen=True)
class DominanceReport:
    violations: int
    max_excess: float
    checked: int


def pointwise_dominance_check(
    samples: Sequence[PairSample], spec: PsiBoundSpec, tol: float = EXACT_TOL
) -> DominanceReport:
    """Count samples with ``delta_x > psi(f_x) + tol``.

    ``max_excess`` is the largest ``delta_x - psi(f_x)`` (negative when every
    sample is strictly dominated, 0 for an empty input).
    """
    if not samples:
        return DominanceReport(0, 0.0, 0)
    f, _, _, dl = _arrays(samples)
    excess = dl - np.asarray(spec(f))
    return DominanceReport(int(np.sum(excess > tol)), float(excess.max()), len(samples))


@dataclass(frozen=True)
class LogSumExpReport:
    softmax_gap: float
    lse_gap: float
    bound: float
    holds: bool


def logsumexp_perturbation_check(x, y, tol: float = EXACT_TOL) -> LogSumExpReport:
    """Softmax and log-sum-exp are Lipschitz in the sup norm.

    ``max_i |softmax(x)_i - softmax(y)_i| <= 2 max|x - y|`` and
    ``|lse(x) - lse(y)| <= max|x - y|``. ``bound`` is the softmax bound.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d vectors of equal length")
    if x.size == 0:
        raise ValueError("vectors must be nonempty")
    dist = float(np.max(np.abs(x - y)))
    sm_gap = float(np.max(np.abs(softmax(x) - softmax(y))))
    lse_gap = float(abs(logsumexp(x) - logsumexp(y)))
    holds = sm_gap <= 2 * dist + tol and lse_gap <= dist + tol
    return LogSumExpReport(sm_gap, lse_gap, 2 * dist, holds)


@dataclass
class ExactPairLaw:
    """Full stationary pair law of a finite heat-bath chain.

    ``samples[i]`` carries the pair ``(x, x')`` and ``weights[i]`` is
    ``mu(x) K(x, x')``. ``detailed_balance`` is
    ``max |mu(x)K(x,y) - mu(y)K(y,x)|`` over all state pairs.
    """

    samples: list[PairSample]
    weights: np.ndarray
    detailed_balance: float
    n_states: int
    meta: dict = field(default_factory=dict)

    def mean_f(self) -> float:
        return stationary_mean(self.samples, self.weights)

    def variance_residual(self) -> float:
        return variance_identity_residual(self.samples, self.weights)

    def bdg(self, k: int) -> BdgReport:
        return bdg_moment_check(self.samples, k, self.weights)
