"""
Operator equality of schedules, checked on a basis of point masses.
"""

from dataclasses import dataclass
from typing import Optional, Sequence
import sys
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))
from exact.distributions import schedule_rows
from schedules.schedule import Schedule, Target, target_sites
from systems.gibbs import SiteGraph
from systems.state_space import StateSpace
from utils.config import setting


@dataclass
class CommuteReport:
    equal: bool
    max_tv: float
    tolerance: float
    nonadjacent_transposition: Optional[bool] = None

    def to_dict(self) -> dict:
        return {
            'equal': self.equal,
            'max_tv': self.max_tv,
            'tolerance': self.tolerance,
            'nonadjacent_transposition': self.nonadjacent_transposition,
        }


def targets_interact(graph: SiteGraph, a: Target, b: Target) -> bool:
    """True when two targets share a site or have adjacent sites."""
    sa, sb = target_sites(a), target_sites(b)
    if set(sa) & set(sb):
        return True
    return any(graph.is_adjacent(u, w) for u in sa for w in sb)


def is_nonadjacent_transposition(graph: SiteGraph, a: Sequence[Target], b: Sequence[Target]) -> bool:
    """b is a with one neighbouring pair of non-interacting targets swapped."""
    a, b = list(a), list(b)
    if len(a) != len(b):
        return False
    diff = [i for i in range(len(a)) if a[i] != b[i]]
    if len(diff) != 2 or diff[1] != diff[0] + 1:
        return False
    i = diff[0]
    return a[i] == b[i + 1] and a[i + 1] == b[i] and not targets_interact(graph, a[i], a[i + 1])


def commute_check(space: StateSpace, schedule_a: Schedule, schedule_b: Schedule,
                  tolerance: Optional[float] = None) -> CommuteReport:
    """
    Compare two schedules as operators on distributions by applying both to
    every point mass of Omega.
    """
    if tolerance is None:
        tolerance = float(setting('tolerances.equality', 1e-12))
    basis = np.eye(space.size)
    out_a = schedule_rows(space, basis, schedule_a)
    out_b = schedule_rows(space, basis, schedule_b)
    max_tv = float(np.max(0.5 * np.abs(out_a - out_b).sum(axis=1)))
    return CommuteReport(
        equal=max_tv <= tolerance,
        max_tv=max_tv,
        tolerance=tolerance,
        nonadjacent_transposition=is_nonadjacent_transposition(space.system.graph, schedule_a, schedule_b),
    )
