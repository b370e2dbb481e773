"""Ground truth by exhaustive enumeration.

Graph and spin enumerations are vectorised over all ``2^m`` bit patterns
with numpy. Every log-sum uses max subtraction via
:func:`scipy.special.logsumexp`. The Curie-Weiss law at large ``n`` needs
only the spin sum, so it is exact for ``n`` up to ``10^6``.

The pair-law builders enumerate every state and every heat-bath move. They
return :class:`steinlab.stein_core.ExactPairLaw` with weights
``mu(x) K(x, x')``. ``mu`` always comes from the Hamiltonian, never from the
kernel, so detailed balance is a real check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from .stein_core import ExactPairLaw, PairSample

MAX_GRAPH_VERTICES = 7
MAX_ISING_SITES = 24
CHUNK = 1 << 20


class ResourceError(ValueError):
    """Requested enumeration exceeds the supported size."""


@dataclass
class ExactDistribution:
    """Law of a statistic: ``values[i]`` has probability ``probs[i]``.

    ``values`` is 1-d for scalar statistics and 2-d (one row per support
    point) for joint statistics.
    """

    values: np.ndarray
    probs: np.ndarray
    log_Z: float
    meta: dict = field(default_factory=dict)

    @property
    def support(self) -> list[tuple]:
        vals = self.values.tolist()
        return list(zip(vals, self.probs.tolist()))

    def expect(self, fn) -> float:
        return float(self.probs @ fn(self.values))


def _from_log_weights(keys: np.ndarray, logw: np.ndarray, meta=None) -> ExactDistribution:
    log_z = float(logsumexp(logw))
    probs = np.exp(logw - log_z)
    return ExactDistribution(keys, probs, log_z, meta or {})


# ---------------------------------------------------------------- graphs


def _pair_index(n: int) -> dict:
    return {p: b for b, p in enumerate(itertools.combinations(range(n), 2))}


def pattern_copies(n: int, spec=None) -> list[tuple[int, ...]]:
    """Every copy of the pattern in ``K_n`` as a sorted tuple of pair indices."""
    idx = _pair_index(n)
    if spec is None:
        return [(idx[(i, j)], idx[(i, k)], idx[(j, k)]) for i, j, k in itertools.combinations(range(n), 3)]
    copies = set()
    for perm in itertools.permutations(range(n), spec.v):
        copies.add(tuple(sorted(idx[tuple(sorted((perm[a], perm[b])))] for a, b in spec.edges)))
    return sorted(copies)


@lru_cache(maxsize=16)
def _count_table(n: int, spec=None) -> tuple[np.ndarray, np.ndarray]:
    """Unique ``(N, E)`` pairs over all graphs on ``n`` vertices, with multiplicities."""
    if n > MAX_GRAPH_VERTICES:
        raise ResourceError(f"graph enumeration supports n <= {MAX_GRAPH_VERTICES}")
    m = n * (n - 1) // 2
    copies = pattern_copies(n, spec)
    counts: dict[tuple[int, int], int] = {}
    total = 1 << m
    for start in range(0, total, CHUNK):
        masks = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        bits = [((masks >> b) & 1).astype(np.int32) for b in range(m)]
        E = np.zeros(masks.size, dtype=np.int64)
        for b in bits:
            E += b
        N = np.zeros(masks.size, dtype=np.int64)
        for cp in copies:
            prod = bits[cp[0]].copy()
            for b in cp[1:]:
                prod &= bits[b]
            N += prod
        key, cnt = np.unique(N * (m + 1) + E, return_counts=True)
        for k, c in zip(key.tolist(), cnt.tolist()):
            kk = divmod(k, m + 1)
            counts[kk] = counts.get(kk, 0) + c
    keys = np.array(sorted(counts), dtype=np.int64).reshape(-1, 2)
    mult = np.array([counts[tuple(k)] for k in keys.tolist()], dtype=float)
    keys.setflags(write=False)
    mult.setflags(write=False)
    return keys, mult


def enumerate_ergm(n: int, beta: float, h: float, spec=None) -> ExactDistribution:
    """Exact law of ``(N, E)`` and ``log Z``.

    With ``spec=None`` ``N`` is the triangle count and the Hamiltonian is
    ``beta T / n + h E``. With a pattern it is ``beta N / (n-2)_{v-2} + h E``.
    """
    if n < 2:
        raise ValueError("need at least two vertices")
    if spec is not None and spec.v > n:
        raise ValueError("pattern has more vertices than the graph")
    keys, mult = _count_table(n, spec)
    scale = n if spec is None else math.perm(n - 2, spec.v - 2)
    logw = np.log(mult) + beta * keys[:, 0] / scale + h * keys[:, 1]
    return _from_log_weights(keys, logw, {"n": n, "beta": beta, "h": h})


def exact_triangle_tail(n: int, p: float, threshold: float) -> float:
    """``P(T >= threshold)`` for the Erdos-Renyi graph ``G(n, p)``."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    keys, mult = _count_table(n, None)
    m = n * (n - 1) // 2
    logw = np.log(mult) + keys[:, 1] * math.log(p) + (m - keys[:, 1]) * math.log1p(-p)
    sel = keys[:, 0] >= threshold - 1e-12
    if not sel.any():
        return 0.0
    return float(np.exp(logsumexp(logw[sel])))


def log_triangle_tail(n: int, p: float, threshold: float) -> float:
    keys, mult = _count_table(n, None)
    m = n * (n - 1) // 2
    logw = np.log(mult) + keys[:, 1] * math.log(p) + (m - keys[:, 1]) * math.log1p(-p)
    sel = keys[:, 0] >= threshold - 1e-12
    return float(logsumexp(logw[sel])) if sel.any() else -math.inf


# ---------------------------------------------------------------- Curie-Weiss


def exact_cw_distribution(n: int, beta: float, h: float = 0.0) -> ExactDistribution:
    """Law of ``m`` from ``P(S = n - 2k) ~ C(n,k) exp(beta (S^2 - n)/(2n) + h S)``."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > 10**7:
        raise ResourceError("n too large for the exact magnetisation law")
    k = np.arange(n + 1)
    S = (n - 2 * k).astype(float)
    logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    logw = logc + beta * (S * S - n) / (2 * n) + h * S
    return _from_log_weights(S / n, logw, {"n": n, "beta": beta, "h": h})


def cw_mean_abs_m(n: int, beta: float = 1.0, h: float = 0.0) -> float:
    d = exact_cw_distribution(n, beta, h)
    return float(d.probs @ np.abs(d.values))


def cw_bruteforce_distribution(n: int, beta: float, h: float = 0.0) -> ExactDistribution:
    """Law of ``m`` by summing over all ``2^n`` spin vectors (small ``n``)."""
    if n > 20:
        raise ResourceError("brute-force Curie-Weiss enumeration supports n <= 20")
    spins = 2 * ((np.arange(2**n)[:, None] >> np.arange(n)) & 1) - 1
    pair = sum(spins[:, i] * spins[:, j] for i, j in itertools.combinations(range(n), 2)) if n > 1 else 0
    logw = beta / n * pair + h * spins.sum(axis=1)
    S = spins.sum(axis=1)
    vals = np.unique(S)
    lw = np.array([logsumexp(logw[S == v]) for v in vals])
    return _from_log_weights(vals / n, lw)


# ---------------------------------------------------------------- Ising


def enumerate_ising(d: int, n: int, beta: float, h: float = 0.0) -> ExactDistribution:
    """Exact law of ``(m, residual)`` and ``log Z`` on the ``n^d`` torus.

    The residual is the temperature-free mean-field residual built from the
    theta table and the spin-product averages. It needs ``n >= 3``; for
    ``n = 2`` only ``m`` is recorded.
    """
    from .ising_lattice import TorusLattice, _krawtchouk, theta_coefficients

    lat = TorusLattice(d, n)
    N = lat.size
    if N > MAX_ISING_SITES:
        raise ResourceError(f"Ising enumeration supports at most {MAX_ISING_SITES} sites")
    edges = lat.edges()
    with_res = lat.distinct and d <= 6
    if with_res:
        th = theta_coefficients(d, beta)
        K = _krawtchouk(2 * d)
        norms = np.array([math.comb(2 * d, k) for k in range(2 * d + 1)], dtype=float)
    total = 1 << N
    keys, logws = [], []
    for start in range(0, total, CHUNK):
        codes = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        s = (2 * ((codes[:, None] >> np.arange(N)) & 1) - 1).astype(np.int64)
        H = beta * np.sum(s[:, edges[:, 0]] * s[:, edges[:, 1]], axis=1) + h * s.sum(axis=1)
        m = s.mean(axis=1)
        if with_res:
            plus = (s[:, lat.neighbors] > 0).sum(axis=2)
            res = (1 - th.theta[0]) * m
            for k in range(1, d):
                r = K[2 * k + 1][plus].mean(axis=1) / norms[2 * k + 1]
                res = res - th.theta[k] * r
            if h != 0:
                corr = np.ones(codes.size)
                for k in range(d):
                    corr -= th.theta[k] * (s * K[2 * k + 1][plus]).mean(axis=1) / norms[2 * k + 1]
                res = res - math.tanh(h) * corr
            keys.append(np.stack([m, res], axis=1))
        else:
            keys.append(m[:, None])
        logws.append(H)
    keys = np.concatenate(keys)
    logw = np.concatenate(logws)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    order = np.argsort(inv, kind="stable")
    bounds = np.flatnonzero(np.diff(inv[order])) + 1
    lw = np.array([logsumexp(chunk) for chunk in np.split(logw[order], bounds)])
    vals = uniq if with_res else uniq[:, 0]
    return _from_log_weights(vals, lw, {"d": d, "n": n, "beta": beta, "h": h})


def ising_transfer_log_z(n: int, beta: float, h: float = 0.0) -> float:
    """``log tr T^n`` for the ring with ``T_{ss'} = exp(beta s s' + h (s + s')/2)``."""
    if n < 3:
        raise ValueError("the ring needs n >= 3 for distinct neighbours")
    s = np.array([1.0, -1.0])
    logT = beta * np.outer(s, s) + h * (s[:, None] + s[None, :]) / 2
    shift = logT.max()
    T = np.exp(logT - shift)
    ev = np.linalg.eigvalsh(T)
    top = ev.max()
    return float(n * (math.log(top) + shift) + math.log(np.sum((ev / top) ** n)))


# ---------------------------------------------------------------- pair laws


def build_pair_law(states, log_weight, moves, f, delta, meta=None) -> ExactPairLaw:
    """Generic exact pair law.

    ``moves(x)`` returns ``(x', prob, F)`` triples whose probabilities sum to
    one; ``log_weight(x)`` is the unnormalised log Gibbs weight.
    """
    states = list(states)
    lw = np.array([log_weight(x) for x in states])
    mu = np.exp(lw - logsumexp(lw))
    mu_of = dict(zip(states, mu.tolist()))
    fx = {x: f(x) for x in states}
    samples, weights = [], []
    kernel: dict = {}
    for x in states:
        dx = delta(x)
        total = 0.0
        for y, p, big in moves(x):
            total += p
            kernel[(x, y)] = kernel.get((x, y), 0.0) + p
            samples.append(PairSample(x, y, fx[x], fx[y], float(big), dx))
            weights.append(mu_of[x] * p)
        if abs(total - 1) > 1e-12:
            raise ArithmeticError(f"kernel row at {x!r} sums to {total}")
    db = 0.0
    for (x, y), p in kernel.items():
        db = max(db, abs(mu_of[x] * p - mu_of[y] * kernel.get((y, x), 0.0)))
    return ExactPairLaw(samples, np.array(weights), db, len(states), meta or {})


def cw_pair_law(n: int, beta: float, h: float = 0.0) -> ExactPairLaw:
    from . import curie_weiss as cw

    if n > 12:
        raise ResourceError("exact Curie-Weiss pair law supports n <= 12")
    states = list(itertools.product((-1, 1), repeat=n))

    def log_weight(x):
        return beta / n * sum(x[i] * x[j] for i, j in itertools.combinations(range(n), 2)) + h * sum(x)

    def moves(x):
        out = []
        for i, v, p in cw.transition_law(np.array(x), beta, h):
            y = x[:i] + (v,) + x[i + 1:]
            out.append((y, p, x[i] - v))
        return out

    return build_pair_law(states, log_weight, moves,
                          lambda x: cw.f_statistic(np.array(x), beta, h),
                          lambda x: cw.delta_exact(np.array(x), beta, h),
                          {"model": "curie_weiss", "n": n, "beta": beta, "h": h})


def cw_rho_pair_law(spec, n: int) -> ExactPairLaw:
    from . import curie_weiss as cw

    a = len(spec.values)
    if a**n > 5000:
        raise ResourceError("exact CW(rho) pair law limited to 5000 states")
    x_at = spec.x
    states = list(itertools.product(range(a), repeat=n))

    def log_weight(st):
        vals = x_at[list(st)]
        return float(np.sum(np.log(spec.p[list(st)])) + spec.beta * vals.sum() ** 2 / (2 * n))

    def counts(st):
        return np.bincount(st, minlength=a)

    def moves(st):
        out = []
        for i, b, p in cw.cw_rho_transition_law(spec, x_at[list(st)], n):
            y = st[:i] + (b,) + st[i + 1:]
            out.append((y, p, x_at[st[i]] - x_at[b]))
        return out

    return build_pair_law(states, log_weight, moves,
                          lambda st: cw.cw_rho_f_from_counts(spec, counts(st), n),
                          lambda st: cw.cw_rho_delta_from_counts(spec, counts(st), n),
                          {"model": "cw_rho", "n": n})


def ising_pair_law(d: int, n: int, beta: float, h: float = 0.0) -> ExactPairLaw:
    from . import ising_lattice as il

    lat = il.TorusLattice(d, n)
    if lat.size > 12:
        raise ResourceError("exact Ising pair law supports at most 12 sites")
    states = list(itertools.product((-1, 1), repeat=lat.size))
    edges = lat.edges()

    def log_weight(x):
        s = np.array(x)
        return float(beta * np.sum(s[edges[:, 0]] * s[edges[:, 1]]) + h * s.sum())

    def moves(x):
        s = np.array(x)
        out = []
        for site, v, p in il.transition_law(lat, s, beta, h):
            y = x[:site] + (v,) + x[site + 1:]
            out.append((y, p, il.big_f(lat, s, site, v, beta, h)))
        return out

    return build_pair_law(states, log_weight, moves,
                          lambda x: il.f_statistic(lat, np.array(x), beta, h),
                          lambda x: il.delta_exact(lat, np.array(x), beta, h),
                          {"model": "ising", "d": d, "n": n, "beta": beta, "h": h})


def _graph_states(n: int):
    from .ergm import EdgeConfig

    m = n * (n - 1) // 2
    if m > 10:
        raise ResourceError("exact graph pair laws support n <= 5")
    return [EdgeConfig.from_mask(n, mask) for mask in range(1 << m)]


def ergm_pair_law(n: int, beta: float, h: float, functional: str = "edge") -> ExactPairLaw:
    """Single-edge heat-bath pair law of the triangle model."""
    from . import ergm

    npairs = math.comb(n, 2)
    triangles = exact_triangle_counter(n)

    def log_weight(g):
        return beta * triangles(g) / n + h * g.edge_count()

    def moves(g):
        out = []
        for (i, j), v, p in ergm.transition_law(g, beta, h):
            y = g.copy()
            y.set_edge(i, j, v)
            scale = npairs * (1.0 if functional == "edge" else ergm.wedge_stat(g, i, j))
            out.append((y, p, scale * (g.has_edge(i, j) - v)))
        return out

    fn = ergm.edge_functional if functional == "edge" else ergm.triangle_functional
    return build_pair_law(_graph_states(n), log_weight, moves,
                          lambda g: fn(g, beta, h),
                          lambda g: ergm.delta_exact(g, beta, h, functional),
                          {"model": "ergm", "functional": functional, "n": n, "beta": beta, "h": h})


def general_ergm_pair_law(n: int, spec, beta: float, h: float) -> ExactPairLaw:
    """Single-edge heat-bath pair law of the pattern model."""
    from . import ergm

    npairs = math.comb(n, 2)
    copies = pattern_copies(n, spec)
    idx = _pair_index(n)
    ff = math.perm(n - 2, spec.v - 2)

    def log_weight(g):
        present = {idx[(i, j)] for i, j in idx if g.has_edge(i, j)}
        count = sum(all(b in present for b in cp) for cp in copies)
        return beta * count / ff + h * g.edge_count()

    def moves(g):
        out = []
        for (i, j), v, p in ergm.general_transition_law(g, spec, beta, h):
            y = g.copy()
            y.set_edge(i, j, v)
            out.append((y, p, npairs * (g.has_edge(i, j) - v)))
        return out

    return build_pair_law(_graph_states(n), log_weight, moves,
                          lambda g: ergm.general_edge_functional(g, spec, beta, h),
                          lambda g: ergm.general_delta_exact(g, spec, beta, h),
                          {"model": "ergm_general", "pattern": spec.name, "n": n, "beta": beta, "h": h})


def two_edge_pair_law(n: int, i: int, j: int, beta: float, h: float) -> ExactPairLaw:
    """Pair law of the two-edge resampling kernel anchored at ``{i, j}``."""
    from . import ergm

    triangles = exact_triangle_counter(n)

    def log_weight(g):
        return beta * triangles(g) / n + h * g.edge_count()

    def moves(g):
        out = []
        for k, x, y, p in ergm.two_edge_moves(g, i, j, beta, h):
            new = ergm.apply_two_edge(g, i, j, k, x, y)
            big = (g.has_edge(i, k) * g.has_edge(j, k) - x * y) * (n - 2) / n
            out.append((new, p, big))
        return out

    return build_pair_law(_graph_states(n), log_weight, moves,
                          lambda g: ergm.two_edge_f(g, i, j, beta, h),
                          lambda g: ergm.two_edge_delta(g, i, j, beta, h),
                          {"model": "ergm_two_edge", "n": n, "i": i, "j": j, "beta": beta, "h": h})


def exact_triangle_counter(n: int):
    """Triangle count by explicit triple enumeration (independent of the bitset code)."""
    triples = list(itertools.combinations(range(n), 3))

    def count(g) -> int:
        return sum(g.has_edge(a, b) and g.has_edge(a, c) and g.has_edge(b, c) for a, b, c in triples)

    return count
