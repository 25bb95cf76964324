"""
Core system types: spins, site graphs, configurations and Gibbs systems.

A GibbsSystem carries everything that defines the stationary measure
pi on Omega: a site graph, a totally ordered spin set, a pair potential
applied on every edge, a site potential, an optional hard constraint and
per-site order flips (used to make the bipartite hard-core model monotone).
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union
import sys
from pathlib import Path

import networkx as nx
import numpy as np

sys.path.append(str(Path(__file__).parent.parent))
from utils.exceptions import ConstraintError, ModelError

Block = Tuple[int, ...]
Constraint = Union[str, Callable[[np.ndarray], np.ndarray]]

CONSTRAINTS = ('none', 'hardcore')


@dataclass(frozen=True)
class SpinSpace:
    """Totally ordered spin labels; the order is the list position"""

    values: Tuple[str, ...]

    def __post_init__(self):
        values = tuple(str(v) for v in self.values)
        if not values:
            raise ModelError("spin space must be nonempty")
        if len(set(values)) != len(values):
            raise ModelError(f"spin labels must be distinct: {values}")
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return len(self.values)

    def index(self, label: str) -> int:
        try:
            return self.values.index(str(label))
        except ValueError:
            raise ModelError(f"unknown spin label {label!r}; expected one of {self.values}")


@dataclass(frozen=True)
class SiteGraph:
    """
    Finite undirected graph on sites 0..n_sites-1.

    Edges are stored normalized as sorted (u, v) pairs with u < v. The
    optional bipartition assigns label 0 or 1 to every site; label 0 is
    the class updated first by alternating schedules.
    """

    n_sites: int
    edges: Tuple[Tuple[int, int], ...] = ()
    bipartition: Optional[Tuple[int, ...]] = None
    name: str = 'custom'

    def __post_init__(self):
        if self.n_sites < 1:
            raise ModelError(f"graph needs at least one site, got {self.n_sites}")
        normalized = set()
        for edge in self.edges:
            u, v = (int(x) for x in edge)
            if u == v:
                raise ModelError(f"self-loop at site {u}")
            if not (0 <= u < self.n_sites and 0 <= v < self.n_sites):
                raise ModelError(f"edge ({u}, {v}) outside 0..{self.n_sites - 1}")
            normalized.add((min(u, v), max(u, v)))
        object.__setattr__(self, 'edges', tuple(sorted(normalized)))

        if self.bipartition is not None:
            labels = tuple(int(x) for x in self.bipartition)
            if len(labels) != self.n_sites or any(x not in (0, 1) for x in labels):
                raise ModelError("bipartition must give label 0 or 1 for every site")
            for u, v in self.edges:
                if labels[u] == labels[v]:
                    raise ModelError(f"edge ({u}, {v}) does not cross the bipartition")
            object.__setattr__(self, 'bipartition', labels)

    @cached_property
    def neighbors(self) -> Tuple[Tuple[int, ...], ...]:
        adjacency: List[List[int]] = [[] for _ in range(self.n_sites)]
        for u, v in self.edges:
            adjacency[u].append(v)
            adjacency[v].append(u)
        return tuple(tuple(sorted(a)) for a in adjacency)

    @cached_property
    def _edge_set(self) -> frozenset:
        return frozenset(self.edges)

    @property
    def degrees(self) -> Tuple[int, ...]:
        return tuple(len(n) for n in self.neighbors)

    @property
    def max_degree(self) -> int:
        return max(self.degrees) if self.n_sites else 0

    @property
    def is_bipartite(self) -> bool:
        return self.bipartition is not None

    def is_adjacent(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_set

    def boundary(self, block: Iterable[int]) -> Block:
        """Exterior boundary: sites outside the block adjacent to it."""
        inside = set(int(v) for v in block)
        for v in inside:
            if not 0 <= v < self.n_sites:
                raise ModelError(f"site {v} outside 0..{self.n_sites - 1}")
        outside = set()
        for v in inside:
            outside.update(w for w in self.neighbors[v] if w not in inside)
        return tuple(sorted(outside))

    def parity_class(self, label: int) -> Block:
        if self.bipartition is None:
            raise ModelError(f"graph {self.name} has no bipartition")
        return tuple(v for v in range(self.n_sites) if self.bipartition[v] == label)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_sites))
        graph.add_edges_from(self.edges)
        return graph


@dataclass(frozen=True)
class Configuration:
    """Spin indices, one per site"""

    spins: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'spins', tuple(int(s) for s in self.spins))

    def __len__(self) -> int:
        return len(self.spins)

    def __getitem__(self, site: int) -> int:
        return self.spins[site]

    def with_spin(self, site: int, spin: int) -> 'Configuration':
        spins = list(self.spins)
        spins[site] = int(spin)
        return Configuration(tuple(spins))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.spins, dtype=np.int8)

    def labels(self, spins: SpinSpace) -> Tuple[str, ...]:
        return tuple(spins.values[s] for s in self.spins)


@dataclass(frozen=True, eq=False)
class GibbsSystem:
    """
    A system <Omega, S, V, pi>.

    pi(sigma) is proportional to prod_v site_potential[v, s_v] times
    prod over edges {u, v} of pair_potential[s_u, s_v] times every extra
    factor, restricted to configurations passing the hard constraint.
    """

    graph: SiteGraph
    spins: SpinSpace
    pair_potential: np.ndarray
    site_potential: np.ndarray
    constraint: Constraint = 'none'
    order_flip: Tuple[bool, ...] = ()
    extra_factors: Tuple[Tuple[Block, np.ndarray], ...] = ()
    name: str = ''
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        k = len(self.spins)
        pair = np.array(self.pair_potential, dtype=np.float64)
        if pair.shape != (k, k):
            raise ModelError(f"pair potential must be {k}x{k}, got {pair.shape}")
        if np.any(pair < 0) or not np.all(np.isfinite(pair)):
            raise ModelError("pair potential must be finite and nonnegative")
        if not np.allclose(pair, pair.T, rtol=0.0, atol=0.0):
            raise ModelError("pair potential must be symmetric on undirected edges")

        site = np.array(self.site_potential, dtype=np.float64)
        if site.ndim == 1:
            site = np.tile(site, (self.graph.n_sites, 1))
        if site.shape != (self.graph.n_sites, k):
            raise ModelError(f"site potential must be {self.graph.n_sites}x{k}, got {site.shape}")
        if np.any(site <= 0) or not np.all(np.isfinite(site)):
            raise ModelError("site potential must be finite and positive")

        if isinstance(self.constraint, str) and self.constraint not in CONSTRAINTS:
            raise ModelError(f"unknown constraint {self.constraint!r}; expected one of {CONSTRAINTS}")
        if self.constraint == 'hardcore' and k != 2:
            raise ModelError("hard-core constraint needs exactly two spins (empty, occupied)")

        flip = tuple(bool(x) for x in self.order_flip) or (False,) * self.graph.n_sites
        if len(flip) != self.graph.n_sites:
            raise ModelError("order_flip needs one entry per site")

        factors = []
        for sites, table in self.extra_factors:
            sites = tuple(int(v) for v in sites)
            table = np.array(table, dtype=np.float64)
            if table.shape != (k,) * len(sites) or np.any(table < 0):
                raise ModelError(f"extra factor on {sites} must be a nonnegative {k}^{len(sites)} table")
            factors.append((sites, table))

        pair.setflags(write=False)
        site.setflags(write=False)
        object.__setattr__(self, 'pair_potential', pair)
        object.__setattr__(self, 'site_potential', site)
        object.__setattr__(self, 'order_flip', flip)
        object.__setattr__(self, 'extra_factors', tuple(factors))

    @property
    def n_sites(self) -> int:
        return self.graph.n_sites

    @property
    def n_spins(self) -> int:
        return len(self.spins)

    @property
    def is_two_spin(self) -> bool:
        return self.n_spins == 2

    @cached_property
    def flip_mask(self) -> np.ndarray:
        mask = np.array(self.order_flip, dtype=bool)
        mask.setflags(write=False)
        return mask

    # ----- order -----

    def rank(self, site: int, spin: int) -> int:
        """Position of spin in the order used at this site."""
        return self.n_spins - 1 - spin if self.order_flip[site] else spin

    def spin_of_rank(self, site: int, rank: int) -> int:
        return self.n_spins - 1 - rank if self.order_flip[site] else rank

    def ranks(self, states: np.ndarray) -> np.ndarray:
        """Per-site ranks of an array of configurations (rows)."""
        states = np.asarray(states)
        return np.where(self.flip_mask, self.n_spins - 1 - states, states).astype(np.int8)

    def leq(self, sigma: Configuration, tau: Configuration) -> bool:
        """Coordinate-wise order sigma <= tau in per-site ranks."""
        return bool(np.all(self.ranks(sigma.as_array()) <= self.ranks(tau.as_array())))

    def top_configuration(self) -> Configuration:
        spins = [self.spin_of_rank(v, self.n_spins - 1) for v in range(self.n_sites)]
        return self._extremal(Configuration(tuple(spins)), 'top')

    def bottom_configuration(self) -> Configuration:
        spins = [self.spin_of_rank(v, 0) for v in range(self.n_sites)]
        return self._extremal(Configuration(tuple(spins)), 'bottom')

    def _extremal(self, config: Configuration, which: str) -> Configuration:
        if not self.is_member(config):
            raise ConstraintError(f"{which} configuration {config.spins} is not in Omega for {self.name}")
        return config

    # ----- membership and weights -----

    def membership(self, states: np.ndarray) -> np.ndarray:
        """Hard-constraint predicate on rows of spin indices."""
        states = np.atleast_2d(np.asarray(states))
        if callable(self.constraint):
            return np.asarray(self.constraint(states), dtype=bool)
        if self.constraint == 'hardcore' and self.graph.edges:
            edges = np.asarray(self.graph.edges)
            both = (states[:, edges[:, 0]] == 1) & (states[:, edges[:, 1]] == 1)
            return ~np.any(both, axis=1)
        return np.ones(states.shape[0], dtype=bool)

    def is_member(self, config: Configuration) -> bool:
        if len(config) != self.n_sites:
            return False
        if any(s < 0 or s >= self.n_spins for s in config.spins):
            return False
        return bool(self.membership(config.as_array())[0])

    def log_weights(self, states: np.ndarray) -> np.ndarray:
        """Unnormalized log pi for rows of spin indices (-inf for zero weight)."""
        states = np.atleast_2d(np.asarray(states, dtype=np.intp))
        with np.errstate(divide='ignore'):
            log_site = np.log(self.site_potential)
            log_pair = np.log(self.pair_potential)
            total = log_site[np.arange(self.n_sites), states].sum(axis=1)
            if self.graph.edges:
                edges = np.asarray(self.graph.edges)
                total = total + log_pair[states[:, edges[:, 0]], states[:, edges[:, 1]]].sum(axis=1)
            for sites, table in self.extra_factors:
                total = total + np.log(table[tuple(states[:, v] for v in sites)])
        return total

    def describe(self) -> str:
        params = ', '.join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name or 'system'}({params})" if params else (self.name or 'system')


def config_from_labels(system: GibbsSystem, labels: Sequence[str]) -> Configuration:
    """Build a Configuration from spin labels such as ('+', '-', '+')."""
    if len(labels) != system.n_sites:
        raise ModelError(f"expected {system.n_sites} spins, got {len(labels)}")
    return Configuration(tuple(system.spins.index(x) for x in labels))
