"""
Certificates for the two structural assumptions of the exact pipeline:
monotonicity of the heat-bath conditionals and the Markov field property
of block updates.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional
import sys
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))
from systems.gibbs import GibbsSystem
from systems.state_space import StateSpace
from utils.config import setting
from utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass
class MonotonicityReport:
    ok: bool
    pairs_checked: int
    tolerance: float
    violation: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'ok': self.ok,
            'pairs_checked': self.pairs_checked,
            'tolerance': self.tolerance,
            'violation': self.violation,
        }


@dataclass
class MarkovFieldReport:
    ok: bool
    block: tuple
    classes_checked: int
    tolerance: float
    violation: Optional[Dict[str, Any]] = field(default=None)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'ok': self.ok,
            'block': list(self.block),
            'classes_checked': self.classes_checked,
            'tolerance': self.tolerance,
            'violation': self.violation,
        }


def conditional_table(space: StateSpace, site: int) -> np.ndarray:
    """
    Heat-bath conditionals at site for every state.

    Returns:
        Array (|Omega|, |S|) indexed by spin index
    """
    fiber = space.fiber(site)
    weights = np.where(fiber >= 0, space.pi[np.maximum(fiber, 0)], 0.0)
    return weights / weights.sum(axis=1, keepdims=True)


def verify_monotone(system: GibbsSystem, space: StateSpace, tolerance: Optional[float] = None) -> MonotonicityReport:
    """
    Check that sigma <= tau implies the conditional at every site under
    sigma is stochastically below the one under tau.

    Pairs are scanned in (sigma, tau) row-major index order, then by site;
    the first violation is reported with the up-set of spins witnessing it.
    """
    if tolerance is None:
        tolerance = float(setting('tolerances.inequality', 1e-9))
    leq = space.leq.copy()
    np.fill_diagonal(leq, False)
    pairs = np.argwhere(leq)
    if pairs.size == 0:
        return MonotonicityReport(ok=True, pairs_checked=0, tolerance=tolerance)

    k = system.n_spins
    worst = None
    for v in range(system.n_sites):
        order = [system.spin_of_rank(v, r) for r in range(k)]
        table = conditional_table(space, v)[:, order]
        # tails[i, r] = P(rank >= r) under state i
        tails = np.cumsum(table[:, ::-1], axis=1)[:, ::-1]
        gap = tails[pairs[:, 0]] - tails[pairs[:, 1]]
        bad = np.flatnonzero(np.any(gap > tolerance, axis=1))
        if bad.size:
            p = int(bad[0])
            if worst is None or p < worst[0]:
                r = int(np.argmax(gap[p]))
                worst = (p, v, r, float(gap[p, r]))

    if worst is None:
        logger.debug(f"{system.describe()}: monotone over {len(pairs)} comparable pairs")
        return MonotonicityReport(ok=True, pairs_checked=len(pairs), tolerance=tolerance)

    p, v, r, gap = worst
    i, j = (int(x) for x in pairs[p])
    labels = system.spins.values
    violation = {
        'sigma': list(space.configuration(i).labels(system.spins)),
        'tau': list(space.configuration(j).labels(system.spins)),
        'site': v,
        'upset': [labels[system.spin_of_rank(v, q)] for q in range(r, k)],
        'gap': gap,
    }
    logger.debug(f"{system.describe()}: not monotone, {violation}")
    return MonotonicityReport(ok=False, pairs_checked=len(pairs), tolerance=tolerance, violation=violation)


def block_pattern_table(space: StateSpace, block: Iterable[int]) -> np.ndarray:
    """
    Conditional law of the block pattern in each class sigma_B^*.

    Returns:
        Array (n_classes, |S|^|B|); row c is U_B sigma for sigma in class c
    """
    classes = space.block_classes(block)
    flat = classes.inverse * classes.n_patterns + classes.patterns
    mass = np.bincount(flat, weights=space.pi, minlength=classes.n_classes * classes.n_patterns)
    table = mass.reshape(classes.n_classes, classes.n_patterns)
    return table / table.sum(axis=1, keepdims=True)


def class_representatives(space: StateSpace, block: Iterable[int]) -> np.ndarray:
    """Lowest state index in every class."""
    classes = space.block_classes(block)
    reps = np.full(classes.n_classes, space.size, dtype=np.int64)
    np.minimum.at(reps, classes.inverse, np.arange(space.size))
    return reps


def verify_markov_field(
    system: GibbsSystem,
    space: StateSpace,
    block: Iterable[int],
    tolerance: Optional[float] = None,
) -> MarkovFieldReport:
    """
    Check that U_B sigma depends on sigma only through sigma restricted to
    the boundary of B, exhaustively over the classes sigma_B^*.
    """
    if tolerance is None:
        tolerance = float(setting('tolerances.equality', 1e-12))
    block = tuple(sorted(set(int(v) for v in block)))
    boundary = system.graph.boundary(block)
    table = block_pattern_table(space, block)
    reps = class_representatives(space, block)

    boundary_keys = space.states[reps][:, list(boundary)].astype(np.int64)
    if boundary:
        _, groups = np.unique(boundary_keys, axis=0, return_inverse=True)
        groups = groups.reshape(-1)
    else:
        groups = np.zeros(len(reps), dtype=np.int64)

    first_in_group: Dict[int, int] = {}
    for c, g in enumerate(groups):
        g = int(g)
        if g not in first_in_group:
            first_in_group[g] = c
            continue
        ref = first_in_group[g]
        diff = float(np.max(np.abs(table[c] - table[ref])))
        if diff > tolerance:
            violation = {
                'sigma': list(space.configuration(int(reps[ref])).labels(system.spins)),
                'tau': list(space.configuration(int(reps[c])).labels(system.spins)),
                'boundary': list(boundary),
                'max_diff': diff,
            }
            logger.debug(f"{system.describe()}: block {block} is not Markov, {violation}")
            return MarkovFieldReport(False, block, c + 1, tolerance, violation)

    return MarkovFieldReport(True, block, len(reps), tolerance)
