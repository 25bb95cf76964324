"""
Packed two-spin configurations for many replicas.

A replica's configuration is stored as per-site ranks (0 = lower spin in the
site's order, 1 = upper), packed little-endian into uint64 words: site v is
bit v % 64 of word v // 64.
"""

from typing import Optional
import sys
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))
from systems.gibbs import Configuration, GibbsSystem, SiteGraph
from utils.exceptions import ModelError

WORD_BITS = 64


class LatticeState:
    """Rank bits of R replicas on n sites, shape (R, ceil(n/64)) uint64."""

    def __init__(self, words: np.ndarray, n_sites: int, graph: Optional[SiteGraph] = None):
        words = np.atleast_2d(np.asarray(words, dtype=np.uint64))
        if words.shape[1] != n_words(n_sites):
            raise ModelError(f"{n_sites} sites need {n_words(n_sites)} words per replica, got {words.shape[1]}")
        self.words = words
        self.n_sites = int(n_sites)
        self.graph = graph

    @classmethod
    def from_ranks(cls, ranks: np.ndarray, graph: Optional[SiteGraph] = None) -> 'LatticeState':
        ranks = np.atleast_2d(np.asarray(ranks))
        if ranks.size and (ranks.min() < 0 or ranks.max() > 1):
            raise ModelError("packed lattice states hold ranks 0/1 only")
        n = ranks.shape[1]
        padded = np.zeros((ranks.shape[0], n_words(n) * WORD_BITS), dtype=np.uint8)
        padded[:, :n] = ranks
        packed = np.packbits(padded, axis=1, bitorder='little')
        return cls(packed.view('<u8'), n, graph)

    @classmethod
    def from_configuration(cls, system: GibbsSystem, config: Configuration, replicas: int = 1) -> 'LatticeState':
        _require_two_spin(system)
        ranks = system.ranks(config.as_array()).astype(np.uint8)
        return cls.from_ranks(np.tile(ranks, (replicas, 1)), system.graph)

    @property
    def n_replicas(self) -> int:
        return self.words.shape[0]

    def ranks(self) -> np.ndarray:
        """Unpacked (R, n) uint8 rank array."""
        as_bytes = np.ascontiguousarray(self.words).astype('<u8').view(np.uint8)
        return np.unpackbits(as_bytes, axis=1, bitorder='little')[:, : self.n_sites]

    def to_configuration(self, system: GibbsSystem, replica: int = 0) -> Configuration:
        _require_two_spin(system)
        ranks = self.ranks()[replica]
        return Configuration(tuple(int(system.spin_of_rank(v, int(r))) for v, r in enumerate(ranks)))

    def hamming(self, other: 'LatticeState') -> np.ndarray:
        """Per-replica number of disagreeing sites."""
        if other.n_sites != self.n_sites or other.n_replicas != self.n_replicas:
            raise ModelError("lattice states of different shapes")
        diff = np.bitwise_xor(self.words, other.words).astype('<u8').view(np.uint8)
        return np.unpackbits(diff, axis=1).sum(axis=1).astype(np.int64)

    def dominates(self, other: 'LatticeState') -> np.ndarray:
        """Per-replica coordinate-wise order self >= other."""
        return np.all((other.words & ~self.words) == 0, axis=1)

    def __eq__(self, other) -> bool:
        return (isinstance(other, LatticeState) and other.n_sites == self.n_sites
                and np.array_equal(other.words, self.words))

    def __repr__(self) -> str:
        return f"LatticeState(replicas={self.n_replicas}, sites={self.n_sites})"


def n_words(n_sites: int) -> int:
    return max(1, -(-int(n_sites) // WORD_BITS))


def magnetization(ranks: np.ndarray) -> np.ndarray:
    """Mean of 2*rank - 1 over sites (the mean spin for Ising)."""
    ranks = np.atleast_2d(ranks)
    return 2.0 * ranks.mean(axis=1) - 1.0


def top_fraction(ranks: np.ndarray) -> np.ndarray:
    return np.atleast_2d(ranks).mean(axis=1)


STATISTICS = {'magnetization': magnetization, 'top_fraction': top_fraction}


def _require_two_spin(system: GibbsSystem) -> None:
    if not system.is_two_spin:
        raise ModelError(f"{system.describe()} has {system.n_spins} spins; packed states need two")
