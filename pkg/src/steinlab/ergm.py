"""Exponential random graphs with triangle or general subgraph Hamiltonians.

The triangle model weights a graph by ``exp(beta T(x) / n + h E(x))``. The
conditional law of one edge is ``P(X_ij = 1 | rest) = phi(L_ij)``, where
``L_ij`` is the common-neighbour count of ``i, j`` divided by ``n`` and
``phi(u) = 1 / (1 + exp(-(beta u + h)))``.

Graphs are stored as per-vertex neighbour bitsets (Python ints), so common
neighbours come from one AND and a popcount. Chains also keep a dense
adjacency matrix and an incrementally updated common-neighbour matrix ``W``
for the vectorised statistics.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import expit

from .rng import UniformBlock, as_rng
from .stein_core import PairSample


def phi(u, beta: float, h: float):
    return expit(beta * np.asarray(u, dtype=float) + h) if np.ndim(u) else float(expit(beta * u + h))


def falling_factorial(n: int, m: int) -> int:
    return math.perm(n, m) if m >= 0 and n >= m else 0


# ---------------------------------------------------------------- graphs


class EdgeConfig:
    """Simple graph on ``n`` vertices held as neighbour bitsets.

    Pairs ``i < j`` are indexed lexicographically for mask conversions.
    """

    __slots__ = ("n", "nbrs")

    def __init__(self, n: int, nbrs: list[int] | None = None):
        if n < 1:
            raise ValueError("need at least one vertex")
        self.n = n
        self.nbrs = [0] * n if nbrs is None else list(nbrs)
        if len(self.nbrs) != n:
            raise ValueError("one bitset per vertex required")

    @classmethod
    def empty(cls, n: int) -> "EdgeConfig":
        return cls(n)

    @classmethod
    def complete(cls, n: int) -> "EdgeConfig":
        full = (1 << n) - 1
        return cls(n, [full & ~(1 << i) for i in range(n)])

    @classmethod
    def from_edges(cls, n: int, edges) -> "EdgeConfig":
        g = cls(n)
        for i, j in edges:
            g.set_edge(i, j, 1)
        return g

    @classmethod
    def from_adjacency(cls, adj) -> "EdgeConfig":
        a = np.asarray(adj)
        n = a.shape[0]
        if a.shape != (n, n) or not np.array_equal(a, a.T) or np.any(np.diag(a)):
            raise ValueError("adjacency must be symmetric with zero diagonal")
        return cls.from_edges(n, zip(*np.nonzero(np.triu(a, 1))))

    @classmethod
    def from_mask(cls, n: int, mask: int) -> "EdgeConfig":
        g = cls(n)
        for b, (i, j) in enumerate(pair_list(n)):
            if mask >> b & 1:
                g.set_edge(i, j, 1)
        return g

    @classmethod
    def random(cls, n: int, p: float, rng) -> "EdgeConfig":
        rng = as_rng(rng)
        a = np.triu(rng.random((n, n)) < p, 1)
        return cls.from_adjacency((a | a.T).astype(np.int8))

    def _check(self, i: int, j: int) -> None:
        if i == j:
            raise ValueError("i and j must differ")
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError("vertex out of range")

    def has_edge(self, i: int, j: int) -> int:
        self._check(i, j)
        return self.nbrs[i] >> j & 1

    def set_edge(self, i: int, j: int, value: int) -> None:
        self._check(i, j)
        i, j = int(i), int(j)
        if value:
            self.nbrs[i] |= 1 << j
            self.nbrs[j] |= 1 << i
        else:
            self.nbrs[i] &= ~(1 << j)
            self.nbrs[j] &= ~(1 << i)

    def common(self, i: int, j: int) -> int:
        return (self.nbrs[i] & self.nbrs[j]).bit_count()

    def edge_count(self) -> int:
        return sum(b.bit_count() for b in self.nbrs) // 2

    def to_adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for i, b in enumerate(self.nbrs):
            for j in range(self.n):
                if b >> j & 1:
                    a[i, j] = 1
        return a

    def to_mask(self) -> int:
        return sum(1 << b for b, (i, j) in enumerate(pair_list(self.n)) if self.nbrs[i] >> j & 1)

    def copy(self) -> "EdgeConfig":
        return EdgeConfig(self.n, self.nbrs)

    def __eq__(self, other) -> bool:
        return isinstance(other, EdgeConfig) and self.n == other.n and self.nbrs == other.nbrs

    def __hash__(self) -> int:
        return hash((self.n, tuple(self.nbrs)))


def pair_list(n: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(n), 2))


def figure1_graph() -> EdgeConfig:
    """Six vertices, eight edges and three triangles."""
    edges = [(1, 2), (1, 3), (2, 3), (1, 4), (3, 4), (1, 6), (3, 6), (2, 5)]
    return EdgeConfig.from_edges(6, [(i - 1, j - 1) for i, j in edges])


def triangle_count(config: EdgeConfig) -> int:
    """``T = (1/3) sum_{i<j, x_ij=1} |N(i) & N(j)|``."""
    total = 0
    for i in range(config.n):
        bi = config.nbrs[i]
        higher = bi >> (i + 1)
        j = i + 1
        while higher:
            if higher & 1:
                total += (bi & config.nbrs[j]).bit_count()
            higher >>= 1
            j += 1
    return total // 3


def wedge_stat(config: EdgeConfig, i: int, j: int) -> float:
    """``L_ij = (1/n) |N(i) & N(j)|``."""
    config._check(i, j)
    return config.common(i, j) / config.n


def wedge_matrix(adj: np.ndarray) -> np.ndarray:
    """Common-neighbour counts with the diagonal zeroed."""
    a = np.asarray(adj, dtype=np.int64)
    W = a @ a
    np.fill_diagonal(W, 0)
    return W


def hamiltonian(config: EdgeConfig, beta: float, h: float) -> float:
    return beta * triangle_count(config) / config.n + h * config.edge_count()


# ---------------------------------------------------------------- single-edge dynamics


def edge_plus_probability(config: EdgeConfig, i: int, j: int, beta: float, h: float) -> float:
    return phi(wedge_stat(config, i, j), beta, h)


def edge_functional(config: EdgeConfig, beta: float, h: float) -> float:
    """``f = E(x) - sum_{k<l} phi(L_kl)``."""
    A = config.to_adjacency()
    L = wedge_matrix(A) / config.n
    iu = np.triu_indices(config.n, 1)
    return float(config.edge_count() - phi(L[iu], beta, h).sum())


def triangle_functional(config: EdgeConfig, beta: float, h: float) -> float:
    """``f = (3/n) T(x) - sum_{k<l} phi(L_kl) L_kl``."""
    A = config.to_adjacency()
    L = wedge_matrix(A) / config.n
    iu = np.triu_indices(config.n, 1)
    return float(3 * triangle_count(config) / config.n - (phi(L[iu], beta, h) * L[iu]).sum())


def _flip_changes(A: np.ndarray, W: np.ndarray, beta: float, h: float, functional: str):
    """``|f(x) - f(x^{ij})|``, ``P(flip ij)`` and ``|F|/C(n,2)`` for all pairs.

    Flipping ``ij`` shifts ``L_ik`` by ``s X_jk / n`` and ``L_jk`` by
    ``s X_ik / n`` (``s = +1`` when the edge is added), so the change in the
    sum over pairs is ``(D A)_ij + (D A)_ji`` with ``D`` the per-pair change of
    the summand. Everything is returned as dense ``n x n`` arrays.
    """
    n = A.shape[0]
    L = W / n
    s = 1 - 2 * A  # +1 where the flip adds an edge
    Af = A.astype(float)
    if functional == "edge":
        g0 = phi(L, beta, h)
        up = phi(L + 1 / n, beta, h) - g0
        down = phi(L - 1 / n, beta, h) - g0
        own = s.astype(float)
    elif functional == "triangle":
        g0 = phi(L, beta, h) * L
        up = phi(L + 1 / n, beta, h) * (L + 1 / n) - g0
        down = phi(L - 1 / n, beta, h) * (L - 1 / n) - g0
        own = 3 * s * W / n
    else:
        raise ValueError(f"unknown functional {functional!r}")
    np.fill_diagonal(up, 0)
    np.fill_diagonal(down, 0)
    UA = up @ Af
    DA = down @ Af
    cross = np.where(s > 0, UA + UA.T, DA + DA.T)
    df = np.abs(own - cross)
    p1 = phi(L, beta, h)
    p_flip = np.where(A > 0, 1 - p1, p1)
    weight = np.ones_like(L) if functional == "edge" else L
    return df, p_flip, weight


def delta_exact(config: EdgeConfig, beta: float, h: float, functional: str = "edge") -> float:
    """Exact ``Delta`` for ``F = C(n,2)(X_ij - X'_ij)`` or ``C(n,2) L_ij (X_ij - X'_ij)``."""
    A = config.to_adjacency()
    df, p_flip, weight = _flip_changes(A, wedge_matrix(A), beta, h, functional)
    iu = np.triu_indices(config.n, 1)
    return float(0.5 * np.sum((p_flip * df * weight)[iu]))


def flip_f_changes(config: EdgeConfig, beta: float, h: float, functional: str = "edge") -> np.ndarray:
    """``|f(x) - f(x^{ij})|`` for every unordered pair, as an ``n x n`` matrix."""
    A = config.to_adjacency()
    return _flip_changes(A, wedge_matrix(A), beta, h, functional)[0]


def transition_law(config: EdgeConfig, beta: float, h: float):
    """All moves ``((i, j), new_value, prob)`` including the pair choice."""
    n = config.n
    npairs = math.comb(n, 2)
    out = []
    for i, j in pair_list(n):
        p = edge_plus_probability(config, i, j, beta, h)
        out.append(((i, j), 1, p / npairs))
        out.append(((i, j), 0, (1 - p) / npairs))
    return out


def gibbs_edge_step(config: EdgeConfig, beta: float, h: float, rng,
                    functional: str = "edge") -> tuple[EdgeConfig, PairSample]:
    """Heat-bath update of a uniform pair with the chosen Stein functional."""
    rng = as_rng(rng)
    n = config.n
    pairs = pair_list(n)
    i, j = pairs[int(rng.integers(len(pairs)))]
    L = wedge_stat(config, i, j)
    new_val = 1 if rng.random() < phi(L, beta, h) else 0
    old = config.has_edge(i, j)
    new = config.copy()
    new.set_edge(i, j, new_val)
    fn = edge_functional if functional == "edge" else triangle_functional
    scale = math.comb(n, 2) * (1.0 if functional == "edge" else L)
    pair = PairSample(
        x=config, x_prime=new,
        f_x=fn(config, beta, h), f_x_prime=fn(new, beta, h),
        big_f=scale * (old - new_val),
        delta_x=delta_exact(config, beta, h, functional),
    )
    return new, pair


class ErgmChain:
    """Single-edge heat-bath chain for the triangle model.

    ``adj`` and ``W`` (common-neighbour counts) are updated on every flip, so
    ``L = W / n`` is always current.
    """

    def __init__(self, n: int, beta: float, h: float, rng=None, init: str | EdgeConfig = "random"):
        if n < 2:
            raise ValueError("need at least two vertices")
        self.n = n
        self.beta = beta
        self.h = h
        self.rng = as_rng(rng)
        if isinstance(init, EdgeConfig):
            g = init.copy()
        elif init == "random":
            g = EdgeConfig.random(n, float(expit(h)), self.rng)
        elif init == "empty":
            g = EdgeConfig.empty(n)
        elif init == "complete":
            g = EdgeConfig.complete(n)
        else:
            raise ValueError(f"unknown init {init!r}")
        self.graph = g
        self.adj = g.to_adjacency()
        self.W = wedge_matrix(self.adj)
        pairs = np.array(pair_list(n))
        self._pi = pairs[:, 0].tolist()
        self._pj = pairs[:, 1].tolist()
        self._p1 = [float(expit(beta * c / n + h)) for c in range(n + 1)]
        self._block = UniformBlock(self.rng, len(self._pi))

    def flip(self, i: int, j: int) -> None:
        """Toggle edge ``ij`` and refresh ``W``."""
        s = 1 - 2 * int(self.adj[i, j])
        A, W = self.adj, self.W
        # wedges i-k-j are unaffected; pairs {i,k} gain/lose the common neighbour j
        W[i, :] += s * A[j, :]
        W[:, i] += s * A[j, :]
        W[j, :] += s * A[i, :]
        W[:, j] += s * A[i, :]
        W[i, i] = 0
        W[j, j] = 0
        A[i, j] = A[j, i] = 1 if s > 0 else 0
        self.graph.set_edge(i, j, int(A[i, j]))

    def run(self, steps: int) -> int:
        """Perform ``steps`` heat-bath updates; return the number of flips."""
        nbrs = self.graph.nbrs
        pi, pj, p1 = self._pi, self._pj, self._p1
        flips = 0
        idx, unis = self._block.take(steps)
        for b, u in zip(idx, unis):
            i = pi[b]
            j = pj[b]
            c = (nbrs[i] & nbrs[j]).bit_count()
            want = 1 if u < p1[c] else 0
            if want != (nbrs[i] >> j & 1):
                self.flip(i, j)
                flips += 1
        return flips

    @property
    def sweep(self) -> int:
        return len(self._pi)

    def L(self) -> np.ndarray:
        return self.W / self.n

    def consistent(self) -> bool:
        """``W`` and the bitsets agree with a from-scratch recomputation."""
        return (np.array_equal(self.W, wedge_matrix(self.adj))
                and np.array_equal(self.adj, self.graph.to_adjacency()))


# ---------------------------------------------------------------- two-edge resampling


def two_edge_law(config: EdgeConfig, i: int, j: int, k: int, beta: float, h: float) -> np.ndarray:
    """Joint conditional law of ``(X_ik, X_jk)`` given the other edges.

    ``law[x, y] = P(X'_ik = x, X'_jk = y | X)``; the exponent keeps the
    ``beta/n`` cross terms that remove the wedge through the other edge.
    """
    if len({i, j, k}) != 3:
        raise ValueError("i, j and k must be distinct")
    n = config.n
    Lik = wedge_stat(config, i, k)
    Ljk = wedge_stat(config, j, k)
    xij = config.has_edge(i, j)
    xik = config.has_edge(i, k)
    xjk = config.has_edge(j, k)
    logw = np.empty((2, 2))
    for x in (0, 1):
        for y in (0, 1):
            logw[x, y] = (beta * x * Lik + beta * y * Ljk + h * x + h * y
                          - beta / n * x * xij * xjk - beta / n * y * xij * xik
                          + beta / n * x * y * xij)
    w = np.exp(logw - logw.max())
    return w / w.sum()


@dataclass(frozen=True)
class PairBoundReport:
    lhs: float
    bound: float
    holds: bool


def pair_resample_bound_check(config: EdgeConfig, i: int, j: int, k: int, beta: float, h: float,
                              tol: float = 1e-12) -> PairBoundReport:
    """``|E(X'_ik X'_jk | X) - phi(L_ik) phi(L_jk)| <= 2 beta / n``."""
    law = two_edge_law(config, i, j, k, beta, h)
    prod = phi(wedge_stat(config, i, k), beta, h) * phi(wedge_stat(config, j, k), beta, h)
    gap = abs(float(law[1, 1]) - prod)
    bound = 2 * beta / config.n
    return PairBoundReport(gap, bound, gap <= bound + tol)


def meanfield_residual_g(config: EdgeConfig, i: int, j: int, beta: float, h: float) -> float:
    """``g = L_ij - (1/n) sum_{k not in {i,j}} phi(L_ik) phi(L_jk)``."""
    config._check(i, j)
    n = config.n
    acc = 0.0
    for k in range(n):
        if k != i and k != j:
            acc += phi(wedge_stat(config, i, k), beta, h) * phi(wedge_stat(config, j, k), beta, h)
    return wedge_stat(config, i, j) - acc / n


def meanfield_residual_matrix(W: np.ndarray, beta: float, h: float) -> np.ndarray:
    """All ``g_ij`` at once from the common-neighbour matrix (diagonal meaningless)."""
    n = W.shape[0]
    L = W / n
    P = phi(L, beta, h)
    np.fill_diagonal(P, 0.0)
    return L - (P @ P) / n


def two_edge_f(config: EdgeConfig, i: int, j: int, beta: float, h: float) -> float:
    """``f = E[F | X]`` for ``F = (n-2)(L_ij - L'_ij)``.

    ``f = (1/n) sum_k (X_ik X_jk - E(X'_ik X'_jk | X))``.
    """
    n = config.n
    acc = 0.0
    for k in range(n):
        if k != i and k != j:
            law = two_edge_law(config, i, j, k, beta, h)
            acc += config.has_edge(i, k) * config.has_edge(j, k) - law[1, 1]
    return acc / n


def two_edge_moves(config: EdgeConfig, i: int, j: int, beta: float, h: float):
    """All moves ``(k, x, y, prob)`` of the two-edge resampling kernel."""
    ks = [k for k in range(config.n) if k != i and k != j]
    out = []
    for k in ks:
        law = two_edge_law(config, i, j, k, beta, h)
        for x in (0, 1):
            for y in (0, 1):
                out.append((k, x, y, float(law[x, y]) / len(ks)))
    return out


def apply_two_edge(config: EdgeConfig, i: int, j: int, k: int, x: int, y: int) -> EdgeConfig:
    g = config.copy()
    g.set_edge(i, k, x)
    g.set_edge(j, k, y)
    return g


def two_edge_delta(config: EdgeConfig, i: int, j: int, beta: float, h: float) -> float:
    """Exact ``Delta`` of the two-edge pair, enumerating all ``4 (n-2)`` outcomes."""
    n = config.n
    f0 = two_edge_f(config, i, j, beta, h)
    delta = 0.0
    for k, x, y, p in two_edge_moves(config, i, j, beta, h):
        big = config.has_edge(i, k) * config.has_edge(j, k) - x * y
        if big == 0 or p == 0:
            continue
        f1 = two_edge_f(apply_two_edge(config, i, j, k, x, y), i, j, beta, h)
        delta += p * abs(f0 - f1) * abs(big) * (n - 2) / n
    return 0.5 * delta


def two_edge_step(config: EdgeConfig, i: int, j: int, beta: float, h: float,
                  rng) -> tuple[EdgeConfig, PairSample]:
    """One two-edge resampling step with exact ``Delta``.

    ``Delta`` enumerates all ``4 (n-2)`` outcomes and re-evaluates ``f``, so
    it costs O(n^3) and is meant for small graphs.
    """
    rng = as_rng(rng)
    if config.n < 3:
        raise ValueError("need at least three vertices")
    n = config.n
    f0 = two_edge_f(config, i, j, beta, h)
    delta = two_edge_delta(config, i, j, beta, h)
    ks = [k for k in range(n) if k != i and k != j]
    k = ks[int(rng.integers(len(ks)))]
    law = two_edge_law(config, i, j, k, beta, h).ravel()
    c = int(rng.choice(4, p=law))
    x, y = divmod(c, 2)
    new = apply_two_edge(config, i, j, k, x, y)
    big = (config.has_edge(i, k) * config.has_edge(j, k) - x * y) * (n - 2) / n
    pair = PairSample(config, new, f0, two_edge_f(new, i, j, beta, h), float(big), delta)
    return new, pair


# ---------------------------------------------------------------- general subgraph F


def _automorphisms(v: int, edges: frozenset) -> int:
    count = 0
    for perm in itertools.permutations(range(v)):
        if all(frozenset((perm[a], perm[b])) in edges for a, b in edges):
            count += 1
    return count


@dataclass(frozen=True)
class SubgraphSpec:
    """Connected simple pattern graph on vertices ``0..v-1``."""

    edges: tuple[tuple[int, int], ...]
    name: str = "F"

    def __post_init__(self) -> None:
        es = [tuple(sorted(e)) for e in self.edges]
        if any(a == b for a, b in es):
            raise ValueError("pattern has a loop")
        if len(set(es)) != len(es):
            raise ValueError("pattern has a repeated edge")
        verts = sorted({x for e in es for x in e})
        if verts != list(range(len(verts))):
            raise ValueError("pattern vertices must be 0..v-1")
        if len(verts) < 3 or len(es) < 2:
            raise ValueError("pattern needs v_F >= 3 and e_F >= 2")
        if len(verts) > 8:
            raise ValueError("automorphism check supports v_F <= 8")
        seen, stack = {0}, [0]
        while stack:
            a = stack.pop()
            for x, y in es:
                for u, w in ((x, y), (y, x)):
                    if u == a and w not in seen:
                        seen.add(w)
                        stack.append(w)
        if len(seen) != len(verts):
            raise ValueError("pattern must be connected")
        object.__setattr__(self, "edges", tuple(es))

    @property
    def v(self) -> int:
        return 1 + max(x for e in self.edges for x in e)

    @property
    def e(self) -> int:
        return len(self.edges)

    @cached_property
    def alpha(self) -> int:
        return _automorphisms(self.v, frozenset(frozenset(e) for e in self.edges))

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj = [[] for _ in range(self.v)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return tuple(tuple(x) for x in adj)

    @classmethod
    def triangle(cls) -> "SubgraphSpec":
        return cls(((0, 1), (1, 2), (0, 2)), "triangle")

    @classmethod
    def two_star(cls) -> "SubgraphSpec":
        return cls(((0, 1), (0, 2)), "two_star")

    @classmethod
    def clique(cls, k: int) -> "SubgraphSpec":
        return cls(tuple(itertools.combinations(range(k), 2)), f"K{k}")

    @classmethod
    def path(cls, k: int) -> "SubgraphSpec":
        return cls(tuple((a, a + 1) for a in range(k - 1)), f"P{k}")

    @classmethod
    def by_name(cls, name: str) -> "SubgraphSpec":
        key = name.lower()
        if key in ("triangle", "k3"):
            return cls.triangle()
        if key in ("two_star", "2-star", "two-star", "wedge"):
            return cls.two_star()
        if key.startswith("k") and key[1:].isdigit():
            return cls.clique(int(key[1:]))
        raise ValueError(f"unknown pattern {name!r}")


def _order_from(spec: SubgraphSpec, start: list[int]) -> list[int]:
    """Pattern vertices in an order where each one touches an earlier one."""
    order = list(start)
    seen = set(order)
    while len(order) < spec.v:
        for a in range(spec.v):
            if a not in seen and any(b in seen for b in spec.adjacency[a]):
                order.append(a)
                seen.add(a)
                break
    return order


def _count_extensions(nbrs: list[int], n: int, spec: SubgraphSpec, order: list[int], fixed: dict) -> int:
    """Injective extensions of ``fixed`` mapping every pattern edge onto a graph edge."""
    all_v = (1 << n) - 1

    def rec(pos: int, assign: dict, used: int) -> int:
        if pos == len(order):
            return 1
        a = order[pos]
        cand = all_v & ~used
        for b in spec.adjacency[a]:
            if b in assign:
                cand &= nbrs[assign[b]]
        total = 0
        while cand:
            low = cand & -cand
            t = low.bit_length() - 1
            assign[a] = t
            total += rec(pos + 1, assign, used | low)
            del assign[a]
            cand ^= low
        return total

    used = 0
    for t in fixed.values():
        used |= 1 << t
    # the fixed part must already respect the pattern edges among fixed vertices
    for a, b in spec.edges:
        if a in fixed and b in fixed and not (nbrs[fixed[a]] >> fixed[b] & 1):
            return 0
    return rec(len(fixed), dict(fixed), used)


def subgraph_count(config: EdgeConfig, spec: SubgraphSpec) -> int:
    """``N(x)``: injective homomorphisms of ``F`` into ``x`` divided by ``alpha_F``."""
    if spec.v > config.n:
        raise ValueError("pattern has more vertices than the graph")
    order = _order_from(spec, [0])
    maps = _count_extensions(config.nbrs, config.n, spec, order, {})
    return maps // spec.alpha


def subgraph_count_delta(config: EdgeConfig, spec: SubgraphSpec, i: int, j: int) -> int:
    """``N(x with ij) - N(x without ij)`` by counting maps anchored on edge ``ij``.

    An injective map sends at most one pattern edge onto ``{i, j}``, so summing
    over pattern edges and both orientations counts each new copy once per
    automorphism.
    """
    config._check(i, j)
    if spec.v > config.n:
        raise ValueError("pattern has more vertices than the graph")
    g = config.copy()
    g.set_edge(i, j, 1)
    total = 0
    for a, b in spec.edges:
        order = _order_from(spec, [a, b])
        for ti, tj in ((i, j), (j, i)):
            total += _count_extensions(g.nbrs, g.n, spec, order, {a: ti, b: tj})
    if total % spec.alpha:
        raise ArithmeticError("anchored map count not divisible by the automorphism count")
    return total // spec.alpha


def general_L(config: EdgeConfig, spec: SubgraphSpec, i: int, j: int) -> float:
    """Discrete derivative of ``N`` at ``ij`` over ``(n-2)_{v_F - 2}``."""
    return subgraph_count_delta(config, spec, i, j) / falling_factorial(config.n - 2, spec.v - 2)


def general_hamiltonian(config: EdgeConfig, spec: SubgraphSpec, beta: float, h: float) -> float:
    ff = falling_factorial(config.n - 2, spec.v - 2)
    return beta * subgraph_count(config, spec) / ff + h * config.edge_count()


def general_transition_law(config: EdgeConfig, spec: SubgraphSpec, beta: float, h: float):
    n = config.n
    npairs = math.comb(n, 2)
    out = []
    for i, j in pair_list(n):
        p = phi(general_L(config, spec, i, j), beta, h)
        out.append(((i, j), 1, p / npairs))
        out.append(((i, j), 0, (1 - p) / npairs))
    return out


def general_edge_functional(config: EdgeConfig, spec: SubgraphSpec, beta: float, h: float) -> float:
    """``f = E(x) - sum_{k<l} phi(L^F_kl)`` for ``F = C(n,2)(X_ij - X'_ij)``."""
    return config.edge_count() - sum(phi(general_L(config, spec, i, j), beta, h) for i, j in pair_list(config.n))


def general_delta_exact(config: EdgeConfig, spec: SubgraphSpec, beta: float, h: float) -> float:
    """``Delta = (1/2) sum_{pairs} P(flip) |f - f^{ij}|`` for ``F = C(n,2)(X_ij - X'_ij)``."""
    f0 = general_edge_functional(config, spec, beta, h)
    delta = 0.0
    for a, b in pair_list(config.n):
        p1 = phi(general_L(config, spec, a, b), beta, h)
        old = config.has_edge(a, b)
        p_flip = 1 - p1 if old else p1
        flipped = config.copy()
        flipped.set_edge(a, b, 1 - old)
        delta += p_flip * abs(f0 - general_edge_functional(flipped, spec, beta, h))
    return 0.5 * delta


def general_gibbs_step(config: EdgeConfig, spec: SubgraphSpec, beta: float, h: float,
                       rng) -> tuple[EdgeConfig, PairSample]:
    """Single-edge heat-bath step for ``H = beta N / (n-2)_{v-2} + h E``.

    ``Delta`` re-evaluates ``f`` after every possible flip; the cost grows like
    ``n^4`` times the embedding count, so keep ``n`` small.
    """
    rng = as_rng(rng)
    n = config.n
    pairs = pair_list(n)
    npairs = len(pairs)
    f0 = general_edge_functional(config, spec, beta, h)
    delta = general_delta_exact(config, spec, beta, h)
    i, j = pairs[int(rng.integers(npairs))]
    new_val = 1 if rng.random() < phi(general_L(config, spec, i, j), beta, h) else 0
    old = config.has_edge(i, j)
    new = config.copy()
    new.set_edge(i, j, new_val)
    pair = PairSample(config, new, f0, general_edge_functional(new, spec, beta, h),
                      float(npairs * (old - new_val)), delta)
    return new, pair


class GeneralErgmChain:
    """Single-edge heat-bath chain for a general pattern (small ``n``)."""

    def __init__(self, n: int, spec: SubgraphSpec, beta: float, h: float, rng=None):
        if spec.v > n:
            raise ValueError("pattern has more vertices than the graph")
        self.n = n
        self.spec = spec
        self.beta = beta
        self.h = h
        self.rng = as_rng(rng)
        self.graph = EdgeConfig.random(n, float(expit(h)), self.rng)
        self.pairs = pair_list(n)
        self._block = UniformBlock(self.rng, len(self.pairs))

    def run(self, steps: int) -> None:
        g = self.graph
        idx, unis = self._block.take(steps)
        for b, u in zip(idx, unis):
            i, j = self.pairs[b]
            g.set_edge(i, j, 1 if u < phi(general_L(g, self.spec, i, j), self.beta, self.h) else 0)


# ---------------------------------------------------------------- experiments


@dataclass
class ScalingResult:
    n: int
    mean_abs_g: float
    std_err: float
    samples: int
    pair_checks: int
    pair_violations: int
    max_pair_gap: float


def residual_scaling_run(n: int, beta: float, h: float, samples: int, burnin_sweeps: int,
                         thin_sweeps: int, rng, probes_per_sample: int = 200) -> ScalingResult:
    """``E|g|`` averaged over all pairs per retained sample, plus two-edge bound probes."""
    rng = as_rng(rng)
    chain = ErgmChain(n, beta, h, rng)
    chain.run(burnin_sweeps * chain.sweep)
    iu = np.triu_indices(n, 1)
    means = np.empty(samples)
    checks = violations = 0
    max_gap = 0.0
    for s in range(samples):
        chain.run(thin_sweeps * chain.sweep)
        G = meanfield_residual_matrix(chain.W, beta, h)
        means[s] = np.abs(G[iu]).mean()
        for _ in range(probes_per_sample):
            i, j, k = (int(v) for v in rng.choice(n, 3, replace=False))
            rep = pair_resample_bound_check(chain.graph, i, j, k, beta, h)
            checks += 1
            violations += not rep.holds
            max_gap = max(max_gap, rep.lhs)
    se = float(means.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return ScalingResult(n, float(means.mean()), se, samples, checks, violations, max_gap)


@dataclass
class LDeviationResult:
    n: int
    u_star: float
    mean_abs_dev: float
    std_err: float
    frac_below_mid: float | None = None


def wedge_deviation_run(n: int, beta: float, h: float, samples: int, burnin_sweeps: int,
                        thin_sweeps: int, rng, u_star: float | None = None,
                        v_star: float | None = None) -> LDeviationResult:
    """``E|L_ij - u*|`` over all pairs and, given ``v*``, the fraction of samples with
    ``max L < (u* + v*)/2``."""
    from .meanfield import psi_roots

    if u_star is None:
        u_star = psi_roots(beta, h).u_star
    chain = ErgmChain(n, beta, h, rng)
    chain.run(burnin_sweeps * chain.sweep)
    iu = np.triu_indices(n, 1)
    devs = np.empty(samples)
    below = 0
    for s in range(samples):
        chain.run(thin_sweeps * chain.sweep)
        L = chain.L()[iu]
        devs[s] = np.abs(L - u_star).mean()
        if v_star is not None:
            below += L.max() < 0.5 * (u_star + v_star)
    se = float(devs.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    frac = below / samples if v_star is not None else None
    return LDeviationResult(n, u_star, float(devs.mean()), se, frac)


def boundary_experiment(n: int, t: float, samples: int, burnin_sweeps: int, thin_sweeps: int,
                        rng) -> LDeviationResult:
    """Run the sampler at the phase-curve point ``gamma(t)``.

    ``u*`` is the non-inflection root and ``v*`` the inflection root.
    """
    from .meanfield import boundary_roots, phase_curve

    h, beta = phase_curve(t)
    u_star, v_star = boundary_roots(t)
    return wedge_deviation_run(n, beta, h, samples, burnin_sweeps, thin_sweeps, rng, u_star, v_star)
