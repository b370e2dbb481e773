"""Curie-Weiss model and the general CW(rho) model.

The classical measure is ``mu(sigma) ~ exp((beta/n) sum_{i<j} s_i s_j + h sum s_i)``.
Heat-bath Glauber dynamics resamples a uniform site from
``P(s_i = +1 | rest) = (1 + tanh(beta m_i + h)) / 2`` with
``m_i = (1/n) sum_{j != i} s_j``.

Because ``m_i = m - s_i/n``, every statistic used here (``f``, ``Delta``)
depends on the configuration only through the spin sum ``S``. That is what
makes the exact ``Delta`` an O(1) computation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .rng import UniformBlock, as_rng
from .stein_core import PairSample

# ---------------------------------------------------------------- spins


def as_spins(config) -> np.ndarray:
    s = np.asarray(config)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("spin configuration must be a nonempty vector")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spins must be +1 or -1")
    return s.astype(np.int8)


def magnetization(config) -> float:
    s = as_spins(config)
    return float(s.sum()) / s.size


def plus_probability(local_field):
    """Heat-bath probability of spin +1 given the local field ``beta m_i + h``."""
    return 0.5 * (1.0 + np.tanh(local_field))


def f_from_sum(S, n: int, beta: float, h: float = 0.0):
    """``f = m - (1/n) sum_i tanh(beta m_i + h)`` as a function of the spin sum."""
    S = np.asarray(S, dtype=float)
    m = S / n
    n_plus = (n + S) / 2
    n_minus = (n - S) / 2
    out = m - (n_plus * np.tanh(beta * (m - 1.0 / n) + h) + n_minus * np.tanh(beta * (m + 1.0 / n) + h)) / n
    return float(out) if out.ndim == 0 else out


def f_statistic(config, beta: float, h: float = 0.0) -> float:
    """``f(sigma) = E[F(sigma, sigma') | sigma]`` for ``F = sigma_I - sigma'_I``."""
    s = as_spins(config)
    n = s.size
    m_i = (s.sum() - s) / n
    return float(s.sum() / n - np.tanh(beta * m_i + h).mean())


def delta_from_sum(S, n: int, beta: float, h: float = 0.0):
    """Exact ``Delta(sigma)`` from the spin sum.

    With ``F = sigma_I - sigma'_I`` only a flip contributes, ``|F| = 2``, so
    ``Delta = (1/n) sum_i P(flip at i) |f(sigma) - f(sigma^i)|`` and sites
    are grouped by their current spin.
    """
    S = np.asarray(S, dtype=float)
    m = S / n
    n_plus = (n + S) / 2
    n_minus = (n - S) / 2
    f0 = f_from_sum(S, n, beta, h)
    p_down = 1.0 - plus_probability(beta * (m - 1.0 / n) + h)
    p_up = plus_probability(beta * (m + 1.0 / n) + h)
    d_down = np.abs(f0 - f_from_sum(S - 2, n, beta, h))
    d_up = np.abs(f0 - f_from_sum(S + 2, n, beta, h))
    out = (n_plus * p_down * d_down + n_minus * p_up * d_up) / n
    return float(out) if np.ndim(out) == 0 else out


def delta_exact(config, beta: float, h: float = 0.0) -> float:
    """Exact ``Delta(sigma)`` by the per-site conditional sum (O(n))."""
    s = as_spins(config)
    n = s.size
    S = int(s.sum())
    f0 = f_from_sum(S, n, beta, h)
    m_i = (S - s) / n
    p_plus = plus_probability(beta * m_i + h)
    p_flip = np.where(s == 1, 1.0 - p_plus, p_plus)
    f_flip = np.where(s == 1, f_from_sum(S - 2, n, beta, h), f_from_sum(S + 2, n, beta, h))
    return float(np.mean(p_flip * np.abs(f0 - f_flip)))


def transition_law(config, beta: float, h: float = 0.0):
    """All single-step heat-bath moves as ``(site, new_spin, prob)``.

    ``prob`` already includes the ``1/n`` site choice.
    """
    s = as_spins(config)
    n = s.size
    S = int(s.sum())
    out = []
    for i in range(n):
        p_plus = float(plus_probability(beta * (S - s[i]) / n + h))
        out.append((i, 1, p_plus / n))
        out.append((i, -1, (1.0 - p_plus) / n))
    return out


def glauber_step(config, beta: float, h: float, rng) -> tuple[np.ndarray, PairSample]:
    """One heat-bath step with the full pair record for ``F = sigma_I - sigma'_I``."""
    rng = as_rng(rng)
    s = as_spins(config)
    n = s.size
    S = int(s.sum())
    i = int(rng.integers(n))
    p_plus = float(plus_probability(beta * (S - s[i]) / n + h))
    new = s.copy()
    new[i] = 1 if rng.random() < p_plus else -1
    S_new = int(S - s[i] + new[i])
    pair = PairSample(
        x=s,
        x_prime=new,
        f_x=f_from_sum(S, n, beta, h),
        f_x_prime=f_from_sum(S_new, n, beta, h),
        big_f=float(s[i] - new[i]),
        delta_x=delta_from_sum(S, n, beta, h),
    )
    return new, pair


class CurieWeissChain:
    """Heat-bath chain with an incrementally maintained spin sum.

    ``m_i`` follows from the running sum, so a step is O(1).
    """

    def __init__(self, n: int, beta: float, h: float = 0.0, rng=None, init: str | np.ndarray = "random"):
        self.n = n
        self.beta = beta
        self.h = h
        self.rng = as_rng(rng)
        if isinstance(init, str):
            if init == "random":
                self.spins = np.where(self.rng.random(n) < 0.5, 1, -1).astype(np.int8).tolist()
            elif init == "plus":
                self.spins = [1] * n
            else:
                raise ValueError(f"unknown init {init!r}")
        else:
            self.spins = as_spins(init).tolist()
            if len(self.spins) != n:
                raise ValueError("init configuration has the wrong length")
        self.S = sum(self.spins)
        self._block = UniformBlock(self.rng, n)
        # P(+1) as a function of the sum of the other spins, which lies in [-(n-1), n-1]
        others = np.arange(-(n - 1), n, dtype=float)
        self._p_plus = plus_probability(beta * others / n + h).tolist()

    def run(self, steps: int) -> None:
        spins = self.spins
        p_plus = self._p_plus
        off = self.n - 1
        S = self.S
        sites, unis = self._block.take(steps)
        for i, u in zip(sites, unis):
            si = spins[i]
            new = 1 if u < p_plus[S - si + off] else -1
            if new != si:
                spins[i] = new
                S += new - si
        self.S = S

    def sample_sums(self, samples: int, burnin: int, thin: int) -> np.ndarray:
        """Spin sums at ``samples`` retained points after ``burnin`` steps."""
        self.run(burnin)
        out = np.empty(samples, dtype=np.int64)
        for k in range(samples):
            self.run(thin)
            out[k] = self.S
        return out

    def config(self) -> np.ndarray:
        return np.array(self.spins, dtype=np.int8)


def default_schedule(n: int, burnin: int | None = None, thin: int | None = None) -> tuple[int, int]:
    """Burn-in of 50 sweeps and thinning of one sweep, in single-site steps."""
    return (50 * n if burnin is None else burnin, n if thin is None else thin)


def sample_pairs(n: int, beta: float, h: float, samples: int, burnin: int | None = None,
                 thin: int | None = None, rng=None) -> list[PairSample]:
    """Retained stationary configurations, each followed by one recorded step.

    ``x`` holds the spin sum rather than the spin vector to keep memory O(samples).
    """
    rng = as_rng(rng)
    burnin, thin = default_schedule(n, burnin, thin)
    chain = CurieWeissChain(n, beta, h, rng)
    chain.run(burnin)
    out = []
    for _ in range(samples):
        chain.run(thin)
        S = chain.S
        i = int(rng.integers(n))
        si = chain.spins[i]
        p_plus = float(plus_probability(beta * (S - si) / n + h))
        new = 1 if rng.random() < p_plus else -1
        S_new = S - si + new
        out.append(PairSample(S, S_new, f_from_sum(S, n, beta, h), f_from_sum(S_new, n, beta, h),
                              float(si - new), delta_from_sum(S, n, beta, h)))
    return out


# ---------------------------------------------------------------- tail experiments


def fit_tail_constant(t, probs, power: float, prefactor: float = 2.0) -> float:
    """Largest ``c`` with ``probs <= prefactor * exp(-c t^power)`` on the grid.

    Grid points with ``t = 0`` or zero probability impose no constraint.
    Returns ``inf`` when nothing constrains ``c``.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(probs, dtype=float)
    mask = (t > 0) & (p > 0)
    if not mask.any():
        return math.inf
    return float(np.min(-np.log(p[mask] / prefactor) / t[mask] ** power))


@dataclass
class TailExperiment:
    t: np.ndarray
    empirical_prob: np.ndarray
    bound_prob: np.ndarray
    n_samples: int
    std_err: np.ndarray
    fitted_c: float
    warning: str | None = None


def _tail_probs(values: np.ndarray, t_grid: np.ndarray, weights=None) -> np.ndarray:
    if weights is None:
        return np.array([np.mean(values >= t) for t in t_grid])
    return np.array([weights[values >= t].sum() for t in t_grid])


def _resolution_warning(probs: np.ndarray, samples: int) -> str | None:
    # need at least ~10 expected hits to resolve a tail probability
    floor = 10.0 / samples
    low = probs[(probs > 0) & (probs < floor)]
    if low.size or np.any(probs == 0):
        return f"tail probabilities below {floor:.2e} are not resolved by {samples} samples"
    return None


def critical_tail_experiment(n: int, samples: int, burnin: int | None, thin: int | None,
                             t_grid, rng) -> TailExperiment:
    """Empirical ``P(n^{1/4} |m| >= t)`` at ``beta = 1, h = 0`` with the fitted constant."""
    t_grid = np.asarray(t_grid, dtype=float)
    burnin, thin = default_schedule(n, burnin, thin)
    chain = CurieWeissChain(n, 1.0, 0.0, rng)
    sums = chain.sample_sums(samples, burnin, thin)
    scaled = n**0.25 * np.abs(sums) / n
    probs = _tail_probs(scaled, t_grid)
    c = fit_tail_constant(t_grid, probs, 4.0)
    bound = 2 * np.exp(-c * t_grid**4) if math.isfinite(c) else np.full_like(t_grid, 2.0)
    se = np.sqrt(probs * (1 - probs) / samples)
    return TailExperiment(t_grid, probs, bound, samples, se, c, _resolution_warning(probs, samples))


def critical_tail_exact(n: int, t_grid) -> TailExperiment:
    """Same table from the exact magnetization law (no sampling error)."""
    from .exact_oracle import exact_cw_distribution

    t_grid = np.asarray(t_grid, dtype=float)
    dist = exact_cw_distribution(n, 1.0, 0.0)
    scaled = n**0.25 * np.abs(dist.values)
    probs = _tail_probs(scaled, t_grid, dist.probs)
    c = fit_tail_constant(t_grid, probs, 4.0)
    bound = 2 * np.exp(-c * t_grid**4)
    return TailExperiment(t_grid, probs, bound, 0, np.zeros_like(probs), c)


def subcritical_functional(m, beta: float):
    """``3(1 - beta) m^2 + beta^3 m^4``."""
    if not 0 <= beta <= 1:
        raise ValueError("beta must lie in [0, 1]")
    m = np.asarray(m, dtype=float)
    out = 3 * (1 - beta) * m**2 + beta**3 * m**4
    return float(out) if out.ndim == 0 else out


def subcritical_functional_check(config, beta: float) -> float:
    return subcritical_functional(magnetization(config), beta)


def subcritical_bound(t, n: int):
    """``2 exp(-n t / 160)``."""
    return 2 * np.exp(-n * np.asarray(t, dtype=float) / 160)


def subcritical_tail_exact(n: int, beta: float, t_grid) -> TailExperiment:
    from .exact_oracle import exact_cw_distribution

    t_grid = np.asarray(t_grid, dtype=float)
    dist = exact_cw_distribution(n, beta, 0.0)
    vals = subcritical_functional(dist.values, beta)
    probs = _tail_probs(vals, t_grid, dist.probs)
    bound = subcritical_bound(t_grid, n)
    fitted = fit_tail_constant(t_grid, probs, 1.0) * 160 / n
    return TailExperiment(t_grid, probs, bound, 0, np.zeros_like(probs), fitted)


# ---------------------------------------------------------------- CW(rho)


@dataclass(frozen=True)
class CwRhoSpec:
    """Symmetric atomic single-spin law ``rho`` with unit second moment."""

    values: tuple[float, ...]
    weights: tuple[float, ...]
    beta: float = 1.0

    def __post_init__(self) -> None:
        x = np.asarray(self.values, dtype=float)
        p = np.asarray(self.weights, dtype=float)
        if x.shape != p.shape or x.ndim != 1 or x.size == 0:
            raise ValueError("values and weights must be equal-length vectors")
        if np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if abs(p @ x**2 - 1) > 1e-10:
            raise ValueError("rho must have unit second moment")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        order = np.argsort(x)
        if not (np.allclose(x[order], -x[order][::-1], atol=1e-12)
                and np.allclose(p[order], p[order][::-1], atol=1e-12)):
            raise ValueError("rho must be symmetric")

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def support_bound(self) -> float:
        return float(np.max(np.abs(self.x)))

    @classmethod
    def rademacher(cls, beta: float = 1.0) -> "CwRhoSpec":
        return cls((-1.0, 1.0), (0.5, 0.5), beta)


def cw_rho_h_function(spec: CwRhoSpec, s):
    """``h(s) = s^2/2 - log sum_j p_j exp(s x_j)``."""
    s_arr = np.asarray(s, dtype=float)
    from scipy.special import logsumexp

    lse = logsumexp(np.multiply.outer(s_arr, spec.x), b=spec.p, axis=-1)
    out = s_arr**2 / 2 - lse
    return float(out) if out.ndim == 0 else out


def cw_rho_h_prime(spec: CwRhoSpec, s):
    s_arr = np.asarray(s, dtype=float)
    z = np.multiply.outer(s_arr, spec.x)
    w = spec.p * np.exp(z - z.max(axis=-1, keepdims=True))
    mean = (w * spec.x).sum(axis=-1) / w.sum(axis=-1)
    out = s_arr - mean
    return float(out) if out.ndim == 0 else out


def cumulants(spec: CwRhoSpec, order: int) -> np.ndarray:
    """Cumulants ``kappa_0..kappa_order`` of rho from its exact atom moments."""
    mu = np.array([spec.p @ spec.x**j for j in range(order + 1)])
    kappa = np.zeros(order + 1)
    for n in range(1, order + 1):
        kappa[n] = mu[n] - sum(math.comb(n - 1, m - 1) * kappa[m] * mu[n - m] for m in range(1, n))
    return kappa


def detect_order_k(spec: CwRhoSpec, k_max: int = 10, tol: float = 1e-10) -> int:
    """First ``k`` with ``h^{(2k)}(0) != 0``.

    ``h^{(j)}(0) = [j == 2] - kappa_j``, so this is the first even cumulant
    beyond the variance that does not vanish.
    """
    kappa = cumulants(spec, 2 * k_max)
    for k in range(1, k_max + 1):
        deriv = (1.0 if k == 1 else 0.0) - kappa[2 * k]
        if abs(deriv) > tol:
            return k
    raise ValueError(f"degenerate rho: h^(j)(0) vanishes for all j <= {2 * k_max}")


def h_derivative_at_zero(spec: CwRhoSpec, order: int) -> float:
    kappa = cumulants(spec, order)
    return (1.0 if order == 2 else 0.0) - float(kappa[order])


def check_condition_b(spec: CwRhoSpec, step: float = 1e-3) -> bool:
    """Sign-scan ``h'`` on ``[-4L, 4L]``; ``True`` if ``s = 0`` is its only zero.

    A failure is reported as a warning since the condition is a user hypothesis.
    """
    L = spec.support_bound
    s = np.arange(step, 4 * L + step / 2, step)
    hp = cw_rho_h_prime(spec, s)
    ok = bool(np.all(hp > 0))
    if not ok:
        warnings.warn("h'(s) vanishes away from s = 0: condition (B) fails for this rho", stacklevel=2)
    return ok


def cw_rho_conditional(spec: CwRhoSpec, m_i: float, n: int) -> np.ndarray:
    """Conditional law of one coordinate: ``p_j exp(beta x_j^2/(2n) + beta m_i x_j)``."""
    b = spec.beta
    logw = np.log(spec.p) + b * spec.x**2 / (2 * n) + b * m_i * spec.x
    w = np.exp(logw - logw.max())
    return w / w.sum()


def cw_rho_conditional_mean(spec: CwRhoSpec, s, n: int):
    """``g(s) = E[X_i | m_i = s]``, computed as an exact finite sum."""
    s_arr = np.asarray(s, dtype=float)
    b = spec.beta
    logw = np.log(spec.p) + b * spec.x**2 / (2 * n) + b * np.multiply.outer(s_arr, spec.x)
    w = np.exp(logw - logw.max(axis=-1, keepdims=True))
    out = (w * spec.x).sum(axis=-1) / w.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def _atom_index(spec: CwRhoSpec, config) -> np.ndarray:
    v = np.asarray(config, dtype=float)
    diff = np.abs(v[:, None] - spec.x[None, :])
    idx = diff.argmin(axis=1)
    if np.any(diff[np.arange(v.size), idx] > 1e-9):
        raise ValueError("configuration entry is not an atom of rho")
    return idx


def cw_rho_f_from_counts(spec: CwRhoSpec, counts: np.ndarray, n: int) -> float:
    """``f = m - (1/n) sum_i g(m_i)`` from per-atom occupation counts."""
    total = float(counts @ spec.x)
    m = total / n
    g = cw_rho_conditional_mean(spec, (total - spec.x) / n, n)
    return m - float(counts @ g) / n


def cw_rho_delta_from_counts(spec: CwRhoSpec, counts: np.ndarray, n: int) -> float:
    """Exact ``Delta`` for ``F = X_I - X'_I``, grouping sites by atom."""
    total = float(counts @ spec.x)
    f0 = cw_rho_f_from_counts(spec, counts, n)
    acc = 0.0
    for a, ca in enumerate(counts):
        if ca == 0:
            continue
        probs = cw_rho_conditional(spec, (total - spec.x[a]) / n, n)
        for b, pb in enumerate(probs):
            if b == a:
                continue
            moved = counts.copy()
            moved[a] -= 1
            moved[b] += 1
            df = abs(f0 - cw_rho_f_from_counts(spec, moved, n))
            acc += ca * pb * df * abs(spec.x[a] - spec.x[b])
    return 0.5 * acc / n


def cw_rho_transition_law(spec: CwRhoSpec, config, n: int):
    """All moves ``(site, atom_index, prob)`` including the ``1/n`` site choice."""
    idx = _atom_index(spec, config)
    total = float(spec.x[idx].sum())
    out = []
    for i in range(n):
        probs = cw_rho_conditional(spec, (total - spec.x[idx[i]]) / n, n)
        out.extend((i, b, float(pb) / n) for b, pb in enumerate(probs))
    return out


def cw_rho_glauber_step(spec: CwRhoSpec, config, n: int, rng) -> tuple[np.ndarray, PairSample]:
    rng = as_rng(rng)
    x = np.asarray(config, dtype=float)
    if x.size != n:
        raise ValueError("configuration length differs from n")
    idx = _atom_index(spec, x)
    counts = np.bincount(idx, minlength=spec.x.size)
    total = float(spec.x[idx].sum())
    i = int(rng.integers(n))
    probs = cw_rho_conditional(spec, (total - x[i]) / n, n)
    b = int(rng.choice(spec.x.size, p=probs))
    new = x.copy()
    new[i] = spec.x[b]
    moved = counts.copy()
    moved[idx[i]] -= 1
    moved[b] += 1
    pair = PairSample(
        x=x, x_prime=new,
        f_x=cw_rho_f_from_counts(spec, counts, n),
        f_x_prime=cw_rho_f_from_counts(spec, moved, n),
        big_f=float(x[i] - new[i]),
        delta_x=cw_rho_delta_from_counts(spec, counts, n),
    )
    return new, pair


class CwRhoChain:
    """Heat-bath chain for CW(rho) tracking atom indices and the running total."""

    def __init__(self, spec: CwRhoSpec, n: int, rng=None):
        self.spec = spec
        self.n = n
        self.rng = as_rng(rng)
        self.idx = self.rng.choice(spec.x.size, size=n, p=spec.p).tolist()
        self.total = float(spec.x[self.idx].sum())
        self._block = UniformBlock(self.rng, n)

    def run(self, steps: int) -> None:
        x = self.spec.x
        xs = x.tolist()
        n = self.n
        sites, unis = self._block.take(steps)
        b = self.spec.beta
        logp = np.log(self.spec.p) + b * x**2 / (2 * n)
        for i, u in zip(sites, unis):
            a = self.idx[i]
            m_i = (self.total - xs[a]) / n
            logw = logp + b * m_i * x
            w = np.exp(logw - logw.max())
            cdf = np.cumsum(w)
            new = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
            new = min(new, len(xs) - 1)
            if new != a:
                self.idx[i] = new
                self.total += xs[new] - xs[a]

    def magnetization(self) -> float:
        return self.total / self.n


def cw_rho_tail_experiment(spec: CwRhoSpec, n: int, samples: int, burnin: int | None,
                           thin: int | None, t_grid, rng) -> TailExperiment:
    """Empirical ``P(n^{1/(2k)} |m| >= t)`` with the fitted constant of ``2 exp(-c t^{2k})``."""
    k = detect_order_k(spec)
    t_grid = np.asarray(t_grid, dtype=float)
    burnin, thin = default_schedule(n, burnin, thin)
    chain = CwRhoChain(spec, n, rng)
    chain.run(burnin)
    mags = np.empty(samples)
    for j in range(samples):
        chain.run(thin)
        mags[j] = chain.magnetization()
    scaled = n ** (1.0 / (2 * k)) * np.abs(mags)
    probs = _tail_probs(scaled, t_grid)
    c = fit_tail_constant(t_grid, probs, 2.0 * k)
    bound = 2 * np.exp(-c * t_grid ** (2 * k)) if math.isfinite(c) else np.full_like(t_grid, 2.0)
    se = np.sqrt(probs * (1 - probs) / samples)
    return TailExperiment(t_grid, probs, bound, samples, se, c, _resolution_warning(probs, samples))
