"""
Stochastic dominance certificates.

lower <= upper (every increasing function has a larger mean under upper)
iff a coupling supported on {(y, x): y <= x} exists. Feasibility is decided
by a maximum flow on source -> y (capacity lower(y)) -> x for y <= x
(uncapacitated) -> sink (capacity upper(x)). When the flow falls short, the
lower-side nodes reachable from the source in the residual network give an
up-set U with lower(U) > upper(U).
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple
import sys
from pathlib import Path

import networkx as nx
import numpy as np

sys.path.append(str(Path(__file__).parent.parent))
from exact.distributions import DistVector, _same_space
from utils.config import setting
from utils.logger import setup_logger

logger = setup_logger(__name__)

# masses are scaled to integers so the flow computation is exact
SCALE = 2 ** 40


@dataclass
class DominanceCertificate:
    """
    verdict 'dominates': coupling lists (lower index, upper index, mass)
    with lower state <= upper state. verdict 'fails': violating_upset is an
    up-set with lower(U) - upper(U) = gap > tolerance.
    """

    verdict: str
    tolerance: float
    coupling: Optional[List[Tuple[int, int, float]]] = None
    violating_upset: Optional[Tuple[int, ...]] = None
    gap: float = 0.0
    method: str = 'flow'

    @property
    def dominates(self) -> bool:
        return self.verdict == 'dominates'

    def to_dict(self, space=None) -> Dict:
        out = {'verdict': self.verdict, 'tolerance': self.tolerance, 'gap': self.gap, 'method': self.method}
        if self.violating_upset is not None:
            if space is not None:
                labels = space.system.spins
                out['violating_upset'] = [list(space.configuration(i).labels(labels)) for i in self.violating_upset]
            else:
                out['violating_upset'] = list(self.violating_upset)
        return out


def _upset_gap(leq: np.ndarray, members: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> Tuple[np.ndarray, float]:
    upset = np.any(leq[members], axis=0) if members.size else np.zeros(leq.shape[0], dtype=bool)
    return upset, float(lower[upset].sum() - upper[upset].sum())


def stochastic_dominance(lower: DistVector, upper: DistVector, tolerance: Optional[float] = None,
                         with_coupling: bool = True) -> DominanceCertificate:
    """
    Decide lower <= upper in the stochastic order of the state space.

    Args:
        lower: candidate smaller distribution
        upper: candidate larger distribution
        tolerance: slack on masses (default tolerances.inequality)
        with_coupling: build the coupling list for positive verdicts

    Returns:
        DominanceCertificate
    """
    _same_space(lower, upper)
    if tolerance is None:
        tolerance = float(setting('tolerances.inequality', 1e-9))
    space = lower.space
    leq = space.leq
    mu, nu = lower.probs, upper.probs

    # principal up-sets catch most failures without a flow
    lower_support = np.flatnonzero(mu > 0.0)
    upper_support = np.flatnonzero(nu > 0.0)
    filter_gap = leq[lower_support] @ mu - leq[lower_support] @ nu
    worst = int(np.argmax(filter_gap))
    if filter_gap[worst] > tolerance:
        upset = np.flatnonzero(leq[lower_support[worst]])
        return DominanceCertificate('fails', tolerance, violating_upset=tuple(int(i) for i in upset),
                                    gap=float(filter_gap[worst]), method='principal-filter')

    # everything in the lower support below everything in the upper support
    if np.all(leq[np.ix_(lower_support, upper_support)]):
        coupling = None
        if with_coupling:
            coupling = [(int(y), int(x), float(mu[y] * nu[x])) for y in lower_support for x in upper_support]
        return DominanceCertificate('dominates', tolerance, coupling=coupling, method='product')

    cap_lower = np.rint(mu * SCALE).astype(np.int64)
    cap_upper = np.rint(nu * SCALE).astype(np.int64)
    network = nx.DiGraph()
    for y in lower_support:
        network.add_edge('s', ('L', int(y)), capacity=int(cap_lower[y]))
    for x in upper_support:
        network.add_edge(('R', int(x)), 't', capacity=int(cap_upper[x]))
    for y in lower_support:
        for x in upper_support[leq[y, upper_support]]:
            network.add_edge(('L', int(y)), ('R', int(x)))

    flow_value, flow = nx.maximum_flow(network, 's', 't')
    shortfall = (int(cap_lower[lower_support].sum()) - flow_value) / SCALE
    slack = tolerance + (lower_support.size + upper_support.size) / SCALE
    logger.debug(f"dominance flow on {network.number_of_nodes()} nodes: shortfall {shortfall:.3g}")

    if shortfall <= slack:
        coupling = None
        if with_coupling:
            coupling = []
            for y in lower_support:
                for node, amount in flow[('L', int(y))].items():
                    if amount > 0:
                        coupling.append((int(y), node[1], amount / SCALE))
        return DominanceCertificate('dominates', tolerance, coupling=coupling)

    _, (source_side, _) = nx.minimum_cut(network, 's', 't')
    members = np.array(sorted(node[1] for node in source_side if isinstance(node, tuple) and node[0] == 'L'),
                       dtype=np.int64)
    upset, gap = _upset_gap(leq, members, mu, nu)
    return DominanceCertificate('fails', tolerance, violating_upset=tuple(int(i) for i in np.flatnonzero(upset)),
                                gap=gap)


def coupling_marginals(certificate: DominanceCertificate, size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Marginals of a dominance coupling (for checking against the inputs)."""
    left = np.zeros(size)
    right = np.zeros(size)
    for y, x, mass in certificate.coupling or []:
        left[y] += mass
        right[x] += mass
    return left, right
