"""
Constructors for the concrete systems: the Ising model and the hard-core
gas on bipartite graphs.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict
import sys
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))
from models.graphs import build_graph
from systems.gibbs import GibbsSystem, SiteGraph, SpinSpace
from utils.exceptions import ModelError
from utils.logger import setup_logger

logger = setup_logger(__name__)

ISING_SPINS = ('-', '+')
HARDCORE_SPINS = ('0', '1')


@dataclass
class ModelSpec:
    """
    What to build: a model kind, a graph family with its parameters, and
    the model parameters.

    Args:
        kind: 'ising' or 'hardcore'
        family: graph family (see models.graphs.FAMILIES)
        graph_params: family parameters, e.g. {'n': 4} or {'d': 2, 'N': 16}
        beta: Ising inverse temperature
        h: Ising external field
        lam: hard-core fugacity
        monotone: flip the hard-core order on label-1 sites
    """

    kind: str = 'ising'
    family: str = 'path'
    graph_params: Dict[str, Any] = field(default_factory=dict)
    beta: float = 0.0
    h: float = 0.0
    lam: float = 1.0
    monotone: bool = True

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ModelSpec':
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ModelError(f"unknown model fields {unknown}")
        return cls(**known)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def label(self) -> str:
        graph = '-'.join(f"{k}{v}" for k, v in sorted(self.graph_params.items()) if k != 'edges')
        if self.kind == 'ising':
            return f"ising-{self.family}{graph}-b{self.beta:g}-h{self.h:g}"
        return f"hardcore-{self.family}{graph}-l{self.lam:g}"


def build_ising(graph: SiteGraph, beta: float, h: float = 0.0) -> GibbsSystem:
    """
    Ising model with spins -1/+1, Psi(s, s') = exp(beta s s') and site
    weight exp(h s). Monotone whenever beta >= 0.
    """
    values = np.array([-1.0, 1.0])
    pair = np.exp(beta * np.outer(values, values))
    site = np.exp(h * values)
    return GibbsSystem(
        graph=graph,
        spins=SpinSpace(ISING_SPINS),
        pair_potential=pair,
        site_potential=site,
        name=f"ising-{graph.name}",
        params={'beta': float(beta), 'h': float(h)},
    )


def build_hardcore_bipartite(graph: SiteGraph, lam: float, monotone: bool = True) -> GibbsSystem:
    """
    Hard-core gas: occupied sites form an independent set, weight
    lam^{#occupied}. With monotone=True the spin order is flipped on
    label-1 sites, so the top configuration occupies the label-0 class.
    """
    if graph.bipartition is None:
        raise ModelError(f"hard-core monotone order needs a bipartite graph; {graph.name} is not")
    if lam <= 0:
        raise ModelError(f"fugacity must be positive, got {lam}")
    flip = tuple(label == 1 for label in graph.bipartition) if monotone else ()
    return GibbsSystem(
        graph=graph,
        spins=SpinSpace(HARDCORE_SPINS),
        pair_potential=np.ones((2, 2)),
        site_potential=np.array([1.0, float(lam)]),
        constraint='hardcore',
        order_flip=flip,
        name=f"hardcore-{graph.name}",
        params={'lam': float(lam)},
    )


def build_system(spec: ModelSpec) -> GibbsSystem:
    """Build the system described by a ModelSpec."""
    graph = build_graph(spec.family, **spec.graph_params)
    if spec.kind == 'ising':
        system = build_ising(graph, spec.beta, spec.h)
    elif spec.kind == 'hardcore':
        system = build_hardcore_bipartite(graph, spec.lam, spec.monotone)
    else:
        raise ModelError(f"unknown model kind {spec.kind!r}; expected 'ising' or 'hardcore'")
    logger.debug(f"built {system.describe()} on {graph.n_sites} sites, {len(graph.edges)} edges")
    return system
