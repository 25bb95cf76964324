"""
Hamming metric and Kantorovich (Wasserstein-1) distance under it.

Optimal couplings come from POT's network-simplex solver (ot.emd) on the
supports of the two laws.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union
import sys
from pathlib import Path

import numpy as np
import ot
from scipy.spatial.distance import cdist

sys.path.append(str(Path(__file__).parent.parent))
from exact.distributions import DistVector, _same_space
from systems.gibbs import Configuration
from systems.state_space import StateSpace
from utils.config import setting
from utils.exceptions import BudgetExceededError, ModelError

ConfigLike = Union[Configuration, Sequence[int], np.ndarray]


@dataclass
class TransportPlan:
    """Coupling entries (index in d1's space, index in d2's space, mass) and its Hamming cost"""

    entries: List[Tuple[int, int, float]] = field(default_factory=list)
    cost: float = 0.0

    def marginals(self, size: int) -> Tuple[np.ndarray, np.ndarray]:
        left, right = np.zeros(size), np.zeros(size)
        for i, j, mass in self.entries:
            left[i] += mass
            right[j] += mass
        return left, right


def _spins(config: ConfigLike) -> np.ndarray:
    return config.as_array() if isinstance(config, Configuration) else np.asarray(config)


def hamming(sigma: ConfigLike, tau: ConfigLike) -> int:
    """Number of disagreeing sites."""
    a, b = _spins(sigma), _spins(tau)
    if a.shape != b.shape:
        raise ModelError(f"configurations on different site sets ({a.size} vs {b.size} sites)")
    return int(np.count_nonzero(a != b))


def hamming_matrix(space: StateSpace) -> np.ndarray:
    """All-pairs Hamming distances over Omega (cached on the space)."""
    def build():
        fractions = cdist(space.states, space.states, metric='hamming')
        matrix = np.rint(fractions * space.n_sites)
        matrix.setflags(write=False)
        return matrix
    return space.cached('hamming', build)


def pattern_hamming_matrix(n_sites: int, n_spins: int) -> np.ndarray:
    """Hamming distances between all |S|^n patterns, indexed by code (site 0 fastest)."""
    codes = np.arange(n_spins ** n_sites, dtype=np.int64)
    powers = n_spins ** np.arange(n_sites, dtype=np.int64)
    patterns = (codes[:, None] // powers[None, :]) % n_spins
    if n_sites == 0:
        return np.zeros((1, 1))
    return np.rint(cdist(patterns, patterns, metric='hamming') * n_sites)


def optimal_transport(p: np.ndarray, q: np.ndarray, cost: np.ndarray,
                      budget: Optional[int] = None) -> Tuple[float, List[Tuple[int, int, float]]]:
    """
    Minimum-cost coupling of two probability vectors for a ground cost.

    Returns:
        (cost, [(i, j, mass), ...]) with indices into p and q
    """
    if budget is None:
        budget = int(setting('transport.max_support_product', 4_000_000))
    ia, ib = np.flatnonzero(p > 0.0), np.flatnonzero(q > 0.0)
    if ia.size * ib.size > budget:
        raise BudgetExceededError('transport support product', int(ia.size * ib.size), budget)
    a = p[ia] / p[ia].sum()
    b = q[ib] / q[ib].sum()
    sub = np.ascontiguousarray(cost[np.ix_(ia, ib)], dtype=np.float64)
    if ia.size == 1 or ib.size == 1:
        plan = np.outer(a, b)
    else:
        plan = ot.emd(a, b, sub)
    total = float(np.sum(plan * sub))
    rows, cols = np.nonzero(plan > 0.0)
    entries = [(int(ia[r]), int(ib[c]), float(plan[r, c])) for r, c in zip(rows, cols)]
    return total, entries


def kantorovich(d1: DistVector, d2: DistVector, budget: Optional[int] = None) -> Tuple[float, TransportPlan]:
    """
    Kantorovich distance rho(d1, d2) with Hamming ground metric.

    Returns:
        (distance, optimal TransportPlan)
    """
    _same_space(d1, d2)
    total, entries = optimal_transport(d1.probs, d2.probs, hamming_matrix(d1.space), budget)
    return total, TransportPlan(entries, total)


def kantorovich_rows(space: StateSpace, rows_a: np.ndarray, rows_b: np.ndarray) -> np.ndarray:
    """Row-wise Kantorovich distances between two stacks of laws."""
    cost = hamming_matrix(space)
    return np.array([optimal_transport(a, b, cost)[0] for a, b in zip(np.atleast_2d(rows_a), np.atleast_2d(rows_b))])
