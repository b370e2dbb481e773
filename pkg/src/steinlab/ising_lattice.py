"""Ising model on the d-dimensional discrete torus.

Gibbs weights are ``exp(beta sum_{x~y} s_x s_y + h sum_x s_x)``, with the
sum over unordered nearest-neighbour pairs. The local field at ``x`` is
``beta sum_{y in N_x} s_y + h = 2 d beta m_x + h``.

The theta coefficients expand ``tanh(beta sum of 2d signs)`` in Walsh
products. Combined with the spin-product averages ``r_k`` and ``s_k`` they
give temperature-free mean-field relations whose residual equals the Stein
statistic ``f`` of single-site heat-bath dynamics.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .rng import UniformBlock, as_rng
from .stein_core import PairSample

MAX_THETA_DIM = 6


class TorusLattice:
    """Row-major ``n^d`` torus with a precomputed neighbour table.

    For ``n = 2`` the two neighbours along an axis coincide. They are collapsed
    to one, ``distinct`` is ``False``, and statistics refuse the lattice.
    """

    def __init__(self, d: int, n: int):
        if d < 1:
            raise ValueError("dimension must be positive")
        if n < 2:
            raise ValueError("side length must be at least 2")
        self.d = d
        self.n = n
        self.size = n**d
        self.distinct = n >= 3
        coords = np.array(np.unravel_index(np.arange(self.size), (n,) * d)).T
        cols = []
        for axis in range(d):
            for step in (1, -1):
                if step == -1 and not self.distinct:
                    continue
                c = coords.copy()
                c[:, axis] = (c[:, axis] + step) % n
                cols.append(np.ravel_multi_index(c.T, (n,) * d))
        self.neighbors = np.stack(cols, axis=1)
        if not self.distinct:
            warnings.warn("n = 2 torus: duplicate neighbours collapsed; statistics are disabled", stacklevel=2)

    @property
    def degree(self) -> int:
        return self.neighbors.shape[1]

    def edges(self) -> np.ndarray:
        """Unordered nearest-neighbour pairs ``(x, y)`` with ``x < y``."""
        x = np.repeat(np.arange(self.size), self.degree)
        y = self.neighbors.ravel()
        keep = x < y
        pairs = np.unique(np.stack([x[keep], y[keep]], axis=1), axis=0)
        return pairs

    def require_distinct(self) -> None:
        if not self.distinct:
            raise ValueError("statistics need n >= 3 so that all 2d neighbours are distinct")


def as_spins(lattice: TorusLattice, config) -> np.ndarray:
    s = np.asarray(config)
    if s.shape != (lattice.size,):
        raise ValueError(f"configuration must have {lattice.size} sites")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spins must be +1 or -1")
    return s.astype(np.int64)


def hamiltonian(lattice: TorusLattice, config, beta: float, h: float = 0.0) -> float:
    s = as_spins(lattice, config)
    e = lattice.edges()
    return float(beta * np.sum(s[e[:, 0]] * s[e[:, 1]]) + h * s.sum())


# ---------------------------------------------------------------- theta calculus


@dataclass(frozen=True)
class ThetaTable:
    d: int
    beta: float
    theta: np.ndarray
    a: np.ndarray
    b: float


def _sign_vectors(m: int) -> np.ndarray:
    """All ``2^m`` vectors in ``{-1, +1}^m`` as rows."""
    bits = (np.arange(2**m)[:, None] >> np.arange(m)) & 1
    return (2 * bits - 1).astype(np.int64)


def theta0_closed_form(d: int, beta: float) -> float:
    """``4^{-(d-1)} sum_{k=1}^{d} k C(2d, d+k) tanh(2 k beta)``."""
    return sum(k * math.comb(2 * d, d + k) * math.tanh(2 * k * beta) for k in range(1, d + 1)) / 4 ** (d - 1)


def b_of_beta(theta: np.ndarray) -> float:
    return float(abs(1 - theta[0]) + sum((2 * k + 1) * abs(theta[k]) for k in range(1, len(theta))))


@lru_cache(maxsize=512)
def _theta_cached(d: int, beta_key: float) -> ThetaTable:
    beta = beta_key
    sig = _sign_vectors(2 * d)
    t = np.tanh(beta * sig.sum(axis=1))
    # a_k is the Walsh coefficient of any k-subset; use the first k coordinates
    prods = np.cumprod(sig, axis=1)
    a = np.empty(2 * d + 1)
    a[0] = t.mean()
    a[1:] = (t[:, None] * prods).mean(axis=0)
    theta = np.array([math.comb(2 * d, 2 * k + 1) * a[2 * k + 1] for k in range(d)])
    closed = theta0_closed_form(d, beta)
    if abs(closed - theta[0]) > 1e-12:
        raise ArithmeticError(f"theta_0 enumeration {theta[0]!r} disagrees with closed form {closed!r}")
    theta.setflags(write=False)
    a.setflags(write=False)
    return ThetaTable(d, beta, theta, a, b_of_beta(theta))


def theta_coefficients(d: int, beta: float) -> ThetaTable:
    """Exact ``a_k`` and ``theta_k`` by enumeration over ``{-1, +1}^{2d}``.

    The enumerated ``theta_0`` is also checked against its closed form.
    Results are cached on ``(d, beta rounded to 1e-12)``.
    """
    if not 1 <= d <= MAX_THETA_DIM:
        raise ValueError(f"d must lie in [1, {MAX_THETA_DIM}]")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return _theta_cached(int(d), round(float(beta), 12))


def fourier_walsh_identity_check(d: int, beta: float) -> float:
    """Max over sign vectors of ``|tanh(beta sum s) - sum_S a_|S| s_S|``.

    The right side is expanded over every subset ``S`` explicitly.
    """
    table = theta_coefficients(d, beta)
    m = 2 * d
    sig = _sign_vectors(m)
    lhs = np.tanh(beta * sig.sum(axis=1))
    # character matrix chi[v, S] = prod_{j in S} sig[v, j]
    masks = np.arange(2**m)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(bool)
    sizes = bits.sum(axis=1)
    chi = np.ones((sig.shape[0], masks.size))
    for j in range(m):
        chi[:, bits[:, j]] *= sig[:, j : j + 1]
    rhs = chi @ table.a[sizes]
    return float(np.max(np.abs(lhs - rhs)))


def beta1_root(d: int, rtol: float = 1e-10) -> float:
    """Unique ``beta_1`` with ``theta_0(beta_1) = 1`` for ``d >= 2``."""
    if d < 2:
        raise ValueError("no root: theta_0 stays below 1 for d = 1")
    lo, hi = 0.0, 0.125
    while theta0_closed_form(d, hi) < 1:
        lo, hi = hi, 2 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if theta0_closed_form(d, mid) < 1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------- spin statistics


@lru_cache(maxsize=64)
def _krawtchouk(m: int) -> np.ndarray:
    """``K[k, p]`` = sum of ``s_S`` over k-subsets of m signs with p plus signs."""
    K = np.zeros((m + 1, m + 1))
    for p in range(m + 1):
        q = m - p
        for k in range(m + 1):
            K[k, p] = sum(math.comb(p, j) * math.comb(q, k - j) * (-1) ** (k - j)
                          for j in range(max(0, k - q), min(k, p) + 1))
    K.setflags(write=False)
    return K


def plus_neighbor_counts(lattice: TorusLattice, s: np.ndarray) -> np.ndarray:
    return (s[lattice.neighbors] > 0).sum(axis=1)


def _check_k(lattice: TorusLattice, k: int) -> None:
    if not 1 <= k <= 2 * lattice.d:
        raise ValueError(f"k must lie in [1, {2 * lattice.d}]")


def r_statistic(lattice: TorusLattice, config, k: int) -> float:
    """Average of ``s_S`` over sites ``x`` and k-subsets ``S`` of ``N_x``."""
    lattice.require_distinct()
    _check_k(lattice, k)
    s = as_spins(lattice, config)
    K = _krawtchouk(2 * lattice.d)
    return float(K[k][plus_neighbor_counts(lattice, s)].mean() / math.comb(2 * lattice.d, k))


def s_statistic(lattice: TorusLattice, config, k: int) -> float:
    """Same average as :func:`r_statistic` with the centre spin included."""
    lattice.require_distinct()
    _check_k(lattice, k)
    s = as_spins(lattice, config)
    K = _krawtchouk(2 * lattice.d)
    return float((s * K[k][plus_neighbor_counts(lattice, s)]).mean() / math.comb(2 * lattice.d, k))


def _r_s_all(lattice: TorusLattice, s: np.ndarray):
    K = _krawtchouk(2 * lattice.d)
    p = plus_neighbor_counts(lattice, s)
    norms = np.array([math.comb(2 * lattice.d, k) for k in range(2 * lattice.d + 1)], dtype=float)
    vals = K[:, p]
    r = vals.mean(axis=1) / norms
    sk = (vals * s).mean(axis=1) / norms
    return r, sk


def meanfield_residual(lattice: TorusLattice, config, beta: float, h: float, thetas: ThetaTable) -> float:
    """``(1 - theta_0) m - g`` from the theta table and spin-product averages.

    ``g = sum_{k>=1} theta_k r_{2k+1}`` for ``h = 0``. For ``h != 0`` it gains
    ``tanh(h) (1 - sum_{k>=0} theta_k s_{2k+1})``. The value equals the Stein
    statistic ``f`` of :func:`glauber_step`.
    """
    lattice.require_distinct()
    if thetas.d != lattice.d:
        raise ValueError("theta table dimension differs from the lattice dimension")
    if abs(thetas.beta - beta) > 1e-12:
        raise ValueError("theta table computed for a different beta")
    s = as_spins(lattice, config)
    r, sk = _r_s_all(lattice, s)
    th = thetas.theta
    m = r[1]
    g = sum(th[k] * r[2 * k + 1] for k in range(1, lattice.d))
    if h != 0:
        g += math.tanh(h) * (1 - sum(th[k] * sk[2 * k + 1] for k in range(lattice.d)))
    return float((1 - th[0]) * m - g)


# ---------------------------------------------------------------- dynamics


def local_fields(lattice: TorusLattice, s: np.ndarray, beta: float) -> np.ndarray:
    """``beta sum_{y in N_x} s_y`` for every site (the field without ``h``)."""
    return beta * s[lattice.neighbors].sum(axis=1)


def _site_terms(s, a, th):
    # per-site contribution to |Omega| f: (1 + th tanh a) s - tanh a - th
    ta = np.tanh(a)
    return (1 + th * ta) * s - ta - th


def f_statistic(lattice: TorusLattice, config, beta: float, h: float = 0.0) -> float:
    """``f = E[F | s]`` with ``F = (1 + tanh h tanh a_I)(s_I - s'_I)``."""
    s = as_spins(lattice, config)
    a = local_fields(lattice, s, beta)
    return float(_site_terms(s, a, math.tanh(h)).mean())


def flip_f_changes(lattice: TorusLattice, s: np.ndarray, beta: float, h: float) -> np.ndarray:
    """``f(s) - f(s^x)`` for every site ``x``.

    A flip at ``x`` changes the term at ``x`` and the fields of its
    neighbours, so each entry is an O(d) update.
    """
    th = math.tanh(h)
    a = local_fields(lattice, s, beta)
    N = lattice.size
    nb = lattice.neighbors
    # term at x: spin flips, field unchanged
    d_self = (1 + th * np.tanh(a)) * 2 * s
    # neighbour y of x: field shifts by -2 beta s_x
    a_nb = a[nb]
    s_nb = s[nb]
    shifted = a_nb - 2 * beta * s[:, None]
    d_nb = _site_terms(s_nb, a_nb, th) - _site_terms(s_nb, shifted, th)
    return (d_self + d_nb.sum(axis=1)) / N


def delta_exact(lattice: TorusLattice, config, beta: float, h: float = 0.0) -> float:
    """``Delta = (1/|Omega|) sum_x P(flip at x) |f - f^x| (1 + tanh h tanh a_x)``."""
    s = as_spins(lattice, config)
    a = local_fields(lattice, s, beta)
    p_plus = 0.5 * (1 + np.tanh(a + h))
    p_flip = np.where(s > 0, 1 - p_plus, p_plus)
    weight = 1 + math.tanh(h) * np.tanh(a)
    return float(np.mean(p_flip * np.abs(flip_f_changes(lattice, s, beta, h)) * weight))


def transition_law(lattice: TorusLattice, config, beta: float, h: float = 0.0):
    """All heat-bath moves ``(site, new_spin, prob)`` with the ``1/|Omega|`` site choice."""
    s = as_spins(lattice, config)
    a = local_fields(lattice, s, beta)
    p_plus = 0.5 * (1 + np.tanh(a + h))
    N = lattice.size
    out = []
    for x in range(N):
        out.append((x, 1, float(p_plus[x]) / N))
        out.append((x, -1, float(1 - p_plus[x]) / N))
    return out


def big_f(lattice: TorusLattice, s: np.ndarray, site: int, new_spin: int, beta: float, h: float) -> float:
    a = beta * s[lattice.neighbors[site]].sum()
    return float((1 + math.tanh(h) * math.tanh(a)) * (s[site] - new_spin))


def glauber_step(lattice: TorusLattice, config, beta: float, h: float, rng) -> tuple[np.ndarray, PairSample]:
    rng = as_rng(rng)
    s = as_spins(lattice, config)
    x = int(rng.integers(lattice.size))
    a = beta * s[lattice.neighbors[x]].sum()
    new_spin = 1 if rng.random() < 0.5 * (1 + math.tanh(a + h)) else -1
    new = s.copy()
    new[x] = new_spin
    pair = PairSample(
        x=s, x_prime=new,
        f_x=f_statistic(lattice, s, beta, h),
        f_x_prime=f_statistic(lattice, new, beta, h),
        big_f=big_f(lattice, s, x, new_spin, beta, h),
        delta_x=delta_exact(lattice, s, beta, h),
    )
    return new, pair


class IsingChain:
    """Random-site heat-bath chain; ``P(+)`` is tabulated by plus-neighbour count."""

    def __init__(self, lattice: TorusLattice, beta: float, h: float = 0.0, rng=None, init="plus"):
        self.lattice = lattice
        self.beta = beta
        self.h = h
        self.rng = as_rng(rng)
        if isinstance(init, str):
            if init == "plus":
                self.spins = [1] * lattice.size
            elif init == "random":
                self.spins = np.where(self.rng.random(lattice.size) < 0.5, 1, -1).tolist()
            else:
                raise ValueError(f"unknown init {init!r}")
        else:
            self.spins = as_spins(lattice, init).tolist()
        self._nb = lattice.neighbors.tolist()
        deg = lattice.degree
        # index by the neighbour spin sum + deg
        self._p_plus = [0.5 * (1 + math.tanh(beta * (v - deg) + h)) for v in range(2 * deg + 1)]
        self._block = UniformBlock(self.rng, lattice.size)

    def run(self, steps: int) -> None:
        spins = self.spins
        nb = self._nb
        p_plus = self._p_plus
        deg = self.lattice.degree
        sites, unis = self._block.take(steps)
        for x, u in zip(sites, unis):
            tot = deg
            for y in nb[x]:
                tot += spins[y]
            spins[x] = 1 if u < p_plus[tot] else -1

    def config(self) -> np.ndarray:
        return np.array(self.spins, dtype=np.int64)


@dataclass
class ResidualTail:
    t: np.ndarray
    empirical_prob: np.ndarray
    bound_prob: np.ndarray
    n_samples: int
    std_err: np.ndarray
    b: float
    residuals: np.ndarray


def residual_bound(t, size: int, b: float, h: float = 0.0):
    """Tail bound on ``P(sqrt|Omega| |res| >= t)``.

    The bound is ``2 exp(-t^2 / (4 b))`` for ``h = 0``. Otherwise it is
    ``2 exp(-t^2 / (4 b (1 + tanh|h|)))``.
    """
    t = np.asarray(t, dtype=float)
    scale = 1.0 if h == 0 else 1 + math.tanh(abs(h))
    return 2 * np.exp(-(t**2) / (4 * b * scale))


def residual_tail_experiment(d: int, n: int, beta: float, h: float, samples: int, burnin: int | None,
                             thin: int | None, t_grid, rng, init="plus") -> ResidualTail:
    """Empirical ``P(sqrt|Omega| |res| >= t)`` from a heat-bath chain."""
    lattice = TorusLattice(d, n)
    lattice.require_distinct()
    burnin = 50 * lattice.size if burnin is None else burnin
    thin = lattice.size if thin is None else thin
    thetas = theta_coefficients(d, beta)
    chain = IsingChain(lattice, beta, h, rng, init)
    chain.run(burnin)
    res = np.empty(samples)
    for j in range(samples):
        chain.run(thin)
        res[j] = meanfield_residual(lattice, chain.config(), beta, h, thetas)
    scaled = math.sqrt(lattice.size) * np.abs(res)
    t_grid = np.asarray(t_grid, dtype=float)
    probs = np.array([np.mean(scaled >= t) for t in t_grid])
    se = np.sqrt(probs * (1 - probs) / samples)
    return ResidualTail(t_grid, probs, residual_bound(t_grid, lattice.size, thetas.b, h), samples, se,
                        thetas.b, res)
