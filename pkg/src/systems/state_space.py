"""
Enumeration of Omega and the quantities every exact computation shares.

States are indexed in increasing order of their code
sum_v s_v * |S|^v, so site 0 varies fastest. The ordering is deterministic
and stable across runs.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, Optional
import sys
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

sys.path.append(str(Path(__file__).parent.parent))
from systems.gibbs import Block, Configuration, GibbsSystem
from utils.config import setting
from utils.exceptions import BudgetExceededError, ConstraintError, ModelError
from utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class BlockClasses:
    """Partition of Omega into the classes sigma_B^* (agreement off the block)."""

    block: Block
    inverse: np.ndarray      # class id per state index
    n_classes: int
    patterns: np.ndarray     # code of the restriction to the block, per state
    n_patterns: int


class StateSpace:
    """
    Exhaustive, duplicate-free enumeration of Omega for one system.

    Read-only after construction apart from lazily filled caches, so it
    can be shared by parallel workers.
    """

    def __init__(self, system: GibbsSystem, states: np.ndarray, codes: np.ndarray):
        self.system = system
        self.states = states
        self.codes = codes
        self.states.setflags(write=False)
        self.codes.setflags(write=False)
        self._cache: Dict = {}

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def size(self) -> int:
        return self.states.shape[0]

    @property
    def n_sites(self) -> int:
        return self.system.n_sites

    @cached_property
    def powers(self) -> np.ndarray:
        return self.system.n_spins ** np.arange(self.n_sites, dtype=np.int64)

    @cached_property
    def ranks(self) -> np.ndarray:
        ranks = self.system.ranks(self.states)
        ranks.setflags(write=False)
        return ranks

    @cached_property
    def pi(self) -> np.ndarray:
        """Stationary probabilities, strictly positive, summing to 1."""
        log_w = self.system.log_weights(self.states)
        if not np.all(np.isfinite(log_w)):
            bad = int(np.argmin(np.isfinite(log_w)))
            raise ModelError(
                f"pi vanishes on member {tuple(self.states[bad])} of Omega for {self.system.describe()}"
            )
        probs = np.exp(log_w - logsumexp(log_w))
        probs /= probs.sum()
        probs.setflags(write=False)
        return probs

    # ----- lookups -----

    def code_of(self, spins: np.ndarray) -> np.ndarray:
        return np.asarray(spins, dtype=np.int64) @ self.powers

    def index_of(self, config: Configuration) -> int:
        if len(config) != self.n_sites:
            raise ConstraintError(f"configuration has {len(config)} sites, system has {self.n_sites}")
        code = int(self.code_of(config.as_array()))
        i = int(np.searchsorted(self.codes, code))
        if i >= self.size or self.codes[i] != code:
            raise ConstraintError(f"configuration {config.spins} is not in Omega")
        return i

    def indices_of_codes(self, codes: np.ndarray) -> np.ndarray:
        """State indices for codes; -1 where the code is not in Omega."""
        codes = np.asarray(codes, dtype=np.int64)
        pos = np.searchsorted(self.codes, codes)
        pos_clipped = np.minimum(pos, self.size - 1)
        found = self.codes[pos_clipped] == codes
        return np.where(found, pos_clipped, -1)

    def configuration(self, index: int) -> Configuration:
        return Configuration(tuple(int(s) for s in self.states[index]))

    @cached_property
    def top_index(self) -> Optional[int]:
        return self._extremal_index(self.system.n_spins - 1)

    @cached_property
    def bottom_index(self) -> Optional[int]:
        return self._extremal_index(0)

    def _extremal_index(self, rank: int) -> Optional[int]:
        target = np.full(self.n_sites, rank)
        hits = np.flatnonzero(np.all(self.ranks == target, axis=1))
        return int(hits[0]) if hits.size else None

    # ----- order -----

    @cached_property
    def leq(self) -> np.ndarray:
        """Comparability matrix: leq[i, j] iff state i <= state j coordinate-wise."""
        budget = int(setting('enumeration.max_comparability_states', 4096))
        if self.size > budget:
            raise BudgetExceededError('comparability relation', self.size, budget)
        ranks = self.ranks
        leq = np.ones((self.size, self.size), dtype=bool)
        for v in range(self.n_sites):
            leq &= ranks[:, v][:, None] <= ranks[:, v][None, :]
        leq.setflags(write=False)
        logger.debug(f"comparability relation on {self.size} states: {int(leq.sum())} pairs")
        return leq

    # ----- block structure -----

    def block_classes(self, block: Iterable[int]) -> BlockClasses:
        """Classes of states agreeing off the block, cached per block."""
        block = tuple(sorted(set(int(v) for v in block)))
        key = ('classes', block)
        if key not in self._cache:
            in_block = np.zeros(self.n_sites, dtype=bool)
            in_block[list(block)] = True
            outside_code = self.states[:, ~in_block].astype(np.int64) @ self.powers[: int((~in_block).sum())]
            _, inverse = np.unique(outside_code, return_inverse=True)
            k = self.system.n_spins
            pattern_powers = k ** np.arange(len(block), dtype=np.int64)
            patterns = self.states[:, list(block)].astype(np.int64) @ pattern_powers
            self._cache[key] = BlockClasses(
                block=block,
                inverse=inverse.reshape(-1),
                n_classes=int(inverse.max()) + 1 if self.size else 0,
                patterns=patterns,
                n_patterns=int(k ** len(block)),
            )
        return self._cache[key]

    def fiber(self, site: int) -> np.ndarray:
        """
        Single-site fibers: fiber[i, s] is the index of state i with its spin
        at site set to s, or -1 when that configuration is outside Omega.
        """
        key = ('fiber', int(site))
        if key not in self._cache:
            k = self.system.n_spins
            base = self.codes - self.states[:, site].astype(np.int64) * self.powers[site]
            candidates = base[:, None] + np.arange(k, dtype=np.int64)[None, :] * self.powers[site]
            table = self.indices_of_codes(candidates.reshape(-1)).reshape(self.size, k)
            table.setflags(write=False)
            self._cache[key] = table
        return self._cache[key]

    def cached(self, key, factory):
        """Memoize an arbitrary derived quantity on this space."""
        if key not in self._cache:
            self._cache[key] = factory()
        return self._cache[key]


def enumerate_states(system: GibbsSystem, budget: Optional[int] = None) -> StateSpace:
    """
    Materialize Omega.

    Args:
        system: Gibbs system
        budget: Maximum |S|^|V| (default enumeration.max_raw_configurations)

    Returns:
        StateSpace ordered by configuration code
    """
    if budget is None:
        budget = int(setting('enumeration.max_raw_configurations', 2 ** 22))
    k, n = system.n_spins, system.n_sites
    raw = k ** n
    if raw > budget:
        raise BudgetExceededError(f"enumeration of {system.describe()}", raw, budget)

    codes = np.arange(raw, dtype=np.int64)
    powers = k ** np.arange(n, dtype=np.int64)
    states = ((codes[:, None] // powers[None, :]) % k).astype(np.int8)
    keep = system.membership(states)
    if not np.any(keep):
        raise ModelError(f"Omega is empty for {system.describe()}")

    space = StateSpace(system, np.ascontiguousarray(states[keep]), codes[keep])
    logger.debug(f"enumerated {space.size} of {raw} configurations for {system.describe()}")
    return space


def stationary_distribution(system: GibbsSystem, space: StateSpace):
    """pi as a DistVector on the enumerated space."""
    from exact.distributions import DistVector

    if space.system is not system:
        raise ModelError("state space was enumerated from a different system")
    return DistVector(space.pi, space)


def conditional_spin_distribution(system: GibbsSystem, config: Configuration, site: int) -> np.ndarray:
    """
    Heat-bath law of the spin at site given the rest of config.

    Returns:
        Probabilities indexed by spin index (0 where config_v^s is outside Omega)
    """
    if not system.is_member(config):
        raise ConstraintError(f"configuration {config.spins} is not in Omega")
    if not 0 <= site < system.n_sites:
        raise ModelError(f"site {site} outside 0..{system.n_sites - 1}")

    candidates = np.tile(config.as_array(), (system.n_spins, 1))
    candidates[:, site] = np.arange(system.n_spins)
    log_w = system.log_weights(candidates)
    log_w[~system.membership(candidates)] = -np.inf
    if not np.any(np.isfinite(log_w)):
        raise ConstraintError(f"no spin at site {site} keeps {config.spins} in Omega")
    return np.exp(log_w - logsumexp(log_w))
