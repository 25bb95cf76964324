"""
Heat-bath dynamics for two-spin systems at scale, and the grand coupling of
the chains started from the top and bottom configurations.

Both coupled chains consume the same site and the same uniform u at every
update and set the new rank by inverse CDF in rank order (rank 0 when
u < P(rank 0)). For monotone systems this keeps top >= bottom; the order is
checked after every update.

Replicas run as rows of one array. Each replica owns the streams
(seed, 'sites'), (seed, 'uniforms') and (seed, 'mask'), so a replica's
trajectory does not depend on which other seeds share its batch.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import expit
from tqdm import tqdm

sys.path.append(str(Path(__file__).parent.parent))
from montecarlo.lattice import LatticeState, magnetization
from schedules.generators import alternating_order
from schedules.specs import ScheduleSpec
from systems.gibbs import GibbsSystem
from utils.config import setting
from utils.exceptions import ModelError, OrderViolationError, ScheduleError
from utils.logger import setup_logger
from utils.rng import make_rng

logger = setup_logger(__name__)

SitePlan = Union[ScheduleSpec, Sequence[int]]


class TwoSpinDynamics:
    """
    Single-site heat bath in rank coordinates.

    P(rank_v = 1 | rest) = expit(bias[v] + sum_j coupling[v, j, rank of j-th neighbour]),
    with a padded neighbour table whose dummy site n always holds rank 0
    and contributes nothing.
    """

    def __init__(self, system: GibbsSystem):
        if not system.is_two_spin:
            raise ModelError(f"{system.describe()}: Monte Carlo dynamics need a two-spin system")
        if callable(system.constraint):
            raise ModelError(f"{system.describe()}: custom constraints are not supported at scale")
        if system.extra_factors:
            raise ModelError(f"{system.describe()}: extra factors are not supported at scale")
        self.system = system
        n = system.n_sites
        self.n_sites = n
        graph = system.graph
        width = max(1, graph.max_degree)

        with np.errstate(divide='ignore'):
            log_pair = np.log(system.pair_potential)
            log_site = np.log(system.site_potential)
        if system.constraint == 'hardcore':
            log_pair = log_pair.copy()
            log_pair[1, 1] = -np.inf

        spin = np.array([[system.spin_of_rank(v, r) for r in (0, 1)] for v in range(n)], dtype=np.intp)
        self.neighbors = np.full((n, width), n, dtype=np.intp)
        self.coupling = np.zeros((n, width, 2))
        for v in range(n):
            for j, w in enumerate(graph.neighbors[v]):
                self.neighbors[v, j] = w
                with np.errstate(invalid='ignore'):
                    self.coupling[v, j] = log_pair[spin[v, 1], spin[w]] - log_pair[spin[v, 0], spin[w]]
        if np.any(np.isnan(self.coupling)):
            raise ModelError(f"{system.describe()}: pair potential vanishes for both spins of a site")
        self.bias = log_site[np.arange(n), spin[:, 1]] - log_site[np.arange(n), spin[:, 0]]
        self._slots = np.arange(width)

        top = system.top_configuration()
        bottom = system.bottom_configuration()
        self.top_ranks = system.ranks(top.as_array()).astype(np.uint8)
        self.bottom_ranks = system.ranks(bottom.as_array()).astype(np.uint8)

    def empty(self, replicas: int, start: str = 'top') -> np.ndarray:
        """(R, n+1) rank array at the top or bottom configuration (last column is the dummy site)."""
        ranks = np.zeros((replicas, self.n_sites + 1), dtype=np.uint8)
        ranks[:, : self.n_sites] = self.top_ranks if start == 'top' else self.bottom_ranks
        return ranks

    def upper_probability(self, ranks: np.ndarray, sites: np.ndarray) -> np.ndarray:
        """P(rank 1) at sites[r] given the rest of replica r."""
        rows = np.arange(ranks.shape[0])
        neighbor_ranks = ranks[rows[:, None], self.neighbors[sites]]
        terms = self.coupling[sites[:, None], self._slots[None, :], neighbor_ranks]
        return expit(self.bias[sites] + terms.sum(axis=1))

    def heat_bath(self, ranks: np.ndarray, sites: np.ndarray, u: np.ndarray,
                  keep: Optional[np.ndarray] = None) -> np.ndarray:
        """Resample sites[r] in every replica r in place; returns the new ranks."""
        rows = np.arange(ranks.shape[0])
        new = (u >= 1.0 - self.upper_probability(ranks, sites)).astype(np.uint8)
        if keep is not None:
            new = np.where(keep, new, ranks[rows, sites])
        ranks[rows, sites] = new
        return new


def coupled_update(dynamics: TwoSpinDynamics, top: LatticeState, bottom: LatticeState,
                   site: Union[int, np.ndarray], u: Union[float, np.ndarray]) -> Tuple[LatticeState, LatticeState]:
    """
    One grand-coupling update of packed states: both chains resample site
    with the same uniform.
    """
    if not np.all(top.dominates(bottom)):
        raise ModelError("coupled update needs top >= bottom in every replica")
    replicas = top.n_replicas
    sites = np.broadcast_to(np.asarray(site, dtype=np.intp), (replicas,)).copy()
    us = np.broadcast_to(np.asarray(u, dtype=np.float64), (replicas,))
    upper = np.zeros((replicas, dynamics.n_sites + 1), dtype=np.uint8)
    lower = np.zeros_like(upper)
    upper[:, :-1] = top.ranks()
    lower[:, :-1] = bottom.ranks()
    dynamics.heat_bath(upper, sites, us)
    dynamics.heat_bath(lower, sites, us)
    return (LatticeState.from_ranks(upper[:, :-1], top.graph),
            LatticeState.from_ranks(lower[:, :-1], bottom.graph))


# ----- site and randomness streams -----

def site_order(plan: SitePlan, system: GibbsSystem) -> Optional[np.ndarray]:
    """Deterministic site order of a plan, or None for a uniformly random scan."""
    if isinstance(plan, ScheduleSpec):
        if plan.kind == 'random_scan':
            return None
        if plan.kind == 'systematic':
            order = plan.permutation if plan.permutation is not None else range(system.n_sites)
            return np.asarray(list(order), dtype=np.intp)
        if plan.kind == 'alternating':
            return np.asarray(alternating_order(system.graph.bipartition), dtype=np.intp)
        raise ScheduleError(f"{plan.kind} schedules are not supported by the Monte Carlo engine")
    order = np.asarray(list(plan), dtype=np.intp)
    if order.size and (order.min() < 0 or order.max() >= system.n_sites):
        raise ScheduleError(f"site order mentions sites outside 0..{system.n_sites - 1}")
    return order


class ReplicaStreams:
    """Per-seed generators drawn in chunks."""

    def __init__(self, seeds: Sequence[int], n_sites: int, order: Optional[np.ndarray],
                 keep_fraction: Optional[float] = None):
        self.seeds = [int(s) for s in seeds]
        self.n_sites = n_sites
        self.order = order
        self.keep_fraction = keep_fraction
        self._sites = [make_rng(s, 'sites') for s in self.seeds] if order is None else None
        self._uniforms = [make_rng(s, 'uniforms') for s in self.seeds]
        self._masks = [make_rng(s, 'mask') for s in self.seeds] if keep_fraction is not None else None

    def draw(self, start: int, count: int) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
        """(sites, uniforms, keep) for steps start..start+count-1, each of shape (count, R)."""
        if self.order is None:
            sites = np.stack([g.integers(0, self.n_sites, size=count, dtype=np.int64) for g in self._sites], axis=1)
        else:
            column = self.order[(start + np.arange(count)) % len(self.order)]
            sites = np.repeat(column[:, None], len(self.seeds), axis=1)
        uniforms = np.stack([g.random(count) for g in self._uniforms], axis=1)
        keep = None
        if self._masks is not None:
            keep = np.stack([g.random(count) < self.keep_fraction for g in self._masks], axis=1)
        return sites.astype(np.intp), uniforms, keep


def _chunk_size(replicas: int) -> int:
    limit = max(1, (1 << 22) // max(1, replicas))
    return max(1, min(int(setting('montecarlo.chunk_size', 1024)), limit))


def _progress(total: int, desc: str):
    enabled = bool(setting('output.progress', True)) and sys.stderr.isatty()
    return tqdm(total=total, desc=desc, disable=not enabled, leave=False)


# ----- coupled runs -----

@dataclass
class CouplingTrajectory:
    seed: int
    records: List[Dict[str, float]] = field(default_factory=list)
    coalescence_step: Optional[int] = None
    max_steps: int = 0

    @property
    def coalesced(self) -> bool:
        return self.coalescence_step is not None

    def to_frame(self) -> pd.DataFrame:
        rows = [{'seed': self.seed, **record} for record in self.records]
        return pd.DataFrame(rows, columns=['seed', 'step', 'hamming', 'mag_top', 'mag_bottom'])

    def to_dict(self) -> Dict[str, Any]:
        return {'seed': self.seed, 'coalescence_step': self.coalescence_step,
                'max_steps': self.max_steps, 'checkpoints': len(self.records)}


def run_coupled_batch(system: GibbsSystem, plan: SitePlan, seeds: Sequence[int], max_steps: int,
                      checkpoints: Optional[int] = None, dynamics: Optional[TwoSpinDynamics] = None,
                      stop_when_coalesced: bool = True) -> List[CouplingTrajectory]:
    """
    Grand coupling from top and bottom for every seed.

    A replica records a checkpoint every max_steps // checkpoints updates
    until it coalesces, and one final record at its coalescence step.

    Raises:
        OrderViolationError: the top chain fell below the bottom chain
    """
    dynamics = dynamics or TwoSpinDynamics(system)
    if checkpoints is None:
        checkpoints = int(setting('montecarlo.checkpoints', 16))
    interval = max(1, max_steps // max(1, checkpoints))
    seeds = [int(s) for s in seeds]
    replicas = len(seeds)
    n = system.n_sites
    streams = ReplicaStreams(seeds, n, site_order(plan, system))
    upper = dynamics.empty(replicas, 'top')
    lower = dynamics.empty(replicas, 'bottom')
    rows = np.arange(replicas)
    diff = np.count_nonzero(upper != lower, axis=1).astype(np.int64)
    trajectories = [CouplingTrajectory(seed=s, max_steps=max_steps) for s in seeds]
    active = diff > 0

    def record(step: int, which: np.ndarray) -> None:
        if not np.any(which):
            return
        mag_top = magnetization(upper[which, :n])
        mag_bottom = magnetization(lower[which, :n])
        for k, r in enumerate(np.flatnonzero(which)):
            trajectories[r].records.append({'step': step, 'hamming': int(diff[r]),
                                            'mag_top': float(mag_top[k]), 'mag_bottom': float(mag_bottom[k])})

    record(0, np.ones(replicas, dtype=bool))
    for r in np.flatnonzero(~active):
        trajectories[r].coalescence_step = 0

    chunk = _chunk_size(replicas)
    step = 0
    with _progress(max_steps, 'coupled chains') as bar:
        while step < max_steps and (np.any(active) or not stop_when_coalesced):
            count = min(chunk, max_steps - step)
            sites, uniforms, _ = streams.draw(step, count)
            for i in range(count):
                s, u = sites[i], uniforms[i]
                before = upper[rows, s] != lower[rows, s]
                new_top = dynamics.heat_bath(upper, s, u)
                new_bottom = dynamics.heat_bath(lower, s, u)
                step += 1
                broken = new_top < new_bottom
                if np.any(broken):
                    r = int(np.flatnonzero(broken)[0])
                    logger.error(f"order violation at step {step}, site {int(s[r])}, seed {seeds[r]}")
                    raise OrderViolationError(step, int(s[r]), seeds[r])
                diff += (new_top != new_bottom).astype(np.int64) - before.astype(np.int64)
                met = active & (diff == 0)
                if np.any(met):
                    record(step, met)
                    for r in np.flatnonzero(met):
                        trajectories[r].coalescence_step = step
                    active &= ~met
                if step % interval == 0:
                    record(step, active)
            bar.update(count)

    logger.debug(f"coupled batch of {replicas}: {sum(t.coalesced for t in trajectories)} coalesced "
                 f"within {max_steps} steps")
    return trajectories


def simulate_coalescence(system: GibbsSystem, plan: SitePlan, seed: int, max_steps: int,
                         checkpoints: Optional[int] = None) -> CouplingTrajectory:
    """Grand coupling for one seed; a missing coalescence is reported, not raised."""
    trajectory = run_coupled_batch(system, plan, [seed], max_steps, checkpoints)[0]
    if not trajectory.coalesced:
        logger.warning(f"seed {seed}: no coalescence within {max_steps} steps")
    return trajectory


def order_preservation_run(system: GibbsSystem, steps: int, seed: int, replicas: int = 1,
                           plan: Optional[SitePlan] = None) -> int:
    """
    Long coupled run without early stopping, checking top >= bottom after
    every update. Returns the number of coupled updates checked.

    Raises:
        OrderViolationError: on the first violation
    """
    plan = plan if plan is not None else ScheduleSpec('random_scan')
    seeds = [int(seed) * replicas + r for r in range(replicas)]
    run_coupled_batch(system, plan, seeds, steps, checkpoints=1, stop_when_coalesced=False)
    return steps * replicas


# ----- single chains -----

def run_chain_batch(system: GibbsSystem, plan: SitePlan, seeds: Sequence[int], steps: int,
                    start: str = 'top', keep: Optional[Union[float, Sequence[bool]]] = None,
                    dynamics: Optional[TwoSpinDynamics] = None) -> np.ndarray:
    """
    Run one chain per seed for `steps` scheduled updates and return the final
    (R, n) rank array.

    Args:
        keep: None keeps every update; a float keeps each update independently
            with that probability ((seed, 'mask') stream); a sequence of bools
            is an explicit mask shared by all replicas
    """
    dynamics = dynamics or TwoSpinDynamics(system)
    seeds = [int(s) for s in seeds]
    replicas = len(seeds)
    fraction = float(keep) if isinstance(keep, (int, float)) and not isinstance(keep, bool) else None
    explicit = None
    if keep is not None and fraction is None:
        explicit = np.asarray(list(keep), dtype=bool)
        if explicit.size != steps:
            raise ScheduleError(f"mask has {explicit.size} entries for {steps} updates")
    streams = ReplicaStreams(seeds, system.n_sites, site_order(plan, system), fraction)
    ranks = dynamics.empty(replicas, start)
    chunk = _chunk_size(replicas)
    step = 0
    with _progress(steps, 'chains') as bar:
        while step < steps:
            count = min(chunk, steps - step)
            sites, uniforms, kept = streams.draw(step, count)
            for i in range(count):
                mask = kept[i] if kept is not None else None
                if explicit is not None:
                    mask = np.full(replicas, explicit[step + i])
                dynamics.heat_bath(ranks, sites[i], uniforms[i], mask)
            step += count
            bar.update(count)
    return ranks[:, : system.n_sites]
