"""Reproducible per-chain random streams.

Every chain gets its own counter-based Philox generator. The stream key is
derived from ``(seed, chain_index)`` through ``SeedSequence``, which hashes
the pair, so chains never share or overlap state.
"""

from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "numpy.random.Philox(SeedSequence(seed, spawn_key=(chain,)))"


def make_rng(seed: int, chain: int = 0) -> np.random.Generator:
    """Generator for chain ``chain`` under master ``seed``."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(chain),))
    return np.random.Generator(np.random.Philox(ss))


def chain_rngs(seed: int, chains: int) -> list[np.random.Generator]:
    return [make_rng(seed, c) for c in range(chains)]


def as_rng(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(0 if rng is None else int(rng))


class UniformBlock:
    """Pre-drawn blocks of site indices and uniforms for tight sampler loops.

    Pulling one number at a time from a Generator costs far more than the
    arithmetic of a single-site update, so samplers consume these blocks.
    """

    def __init__(self, rng: np.random.Generator, n_sites: int, block: int = 65536):
        self.rng = rng
        self.n_sites = n_sites
        self.block = block
        self._refill()

    def _refill(self) -> None:
        self.sites = self.rng.integers(0, self.n_sites, size=self.block).tolist()
        self.uniforms = self.rng.random(self.block).tolist()
        self.pos = 0

    def take(self, k: int) -> tuple[list[int], list[float]]:
        """Return ``k`` (site, uniform) draws as two lists."""
        sites: list[int] = []
        unis: list[float] = []
        while k > 0:
            if self.pos >= self.block:
                self._refill()
            j = min(k, self.block - self.pos)
            sites.extend(self.sites[self.pos:self.pos + j])
            unis.extend(self.uniforms[self.pos:self.pos + j])
            self.pos += j
            k -= j
        return sites, unis
