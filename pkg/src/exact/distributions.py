"""
Exact distribution propagation over an enumerated state space.

Every update is a block update: for block B the new mass of sigma is
pi(sigma) * mu(sigma_B^*) / pi(sigma_B^*), where sigma_B^* is the class of
states agreeing with sigma off B. A single-site update is the block {v}.
The row-matrix helpers (`*_rows`) propagate many distributions at once and
back the worst-start mixing times and the transport computations.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import sparse

sys.path.append(str(Path(__file__).parent.parent))
from schedules.schedule import Schedule, Target, target_sites
from schedules.specs import ScheduleSpec
from systems.gibbs import Block, Configuration
from systems.state_space import StateSpace
from utils.config import setting
from utils.exceptions import BudgetExceededError, ModelError, ScheduleError, SpaceMismatchError
from utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True, eq=False)
class DistVector:
    """Probability vector indexed by StateSpace index"""

    probs: np.ndarray
    space: StateSpace

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64).reshape(-1)
        if probs.shape != (self.space.size,):
            raise SpaceMismatchError(f"vector of length {probs.size} on a space of {self.space.size} states")
        tol = float(setting('tolerances.mass', 1e-12))
        if np.any(probs < -tol) or abs(probs.sum() - 1.0) > tol * max(1.0, np.sqrt(probs.size)):
            raise ModelError(f"not a probability vector (sum {probs.sum():.15g}, min {probs.min():.3g})")
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        object.__setattr__(self, 'probs', probs)

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, i):
        return self.probs[i]

    def mix(self, other: 'DistVector', weight: float) -> 'DistVector':
        """(1 - weight) * self + weight * other."""
        _same_space(self, other)
        return normalized((1.0 - weight) * self.probs + weight * other.probs, self.space)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0.0)


def normalized(probs: np.ndarray, space: StateSpace) -> DistVector:
    """Wrap a propagated vector, absorbing rounding in the last digits."""
    probs = np.clip(np.asarray(probs, dtype=np.float64), 0.0, None)
    return DistVector(probs / probs.sum(), space)


def _same_space(d1: DistVector, d2: DistVector) -> None:
    if d1.space is not d2.space:
        raise SpaceMismatchError("distributions live on different state spaces")


# ----- row propagation -----

def _class_indicator(space: StateSpace, block: Block) -> sparse.csr_matrix:
    classes = space.block_classes(block)
    return space.cached(
        ('indicator', classes.block),
        lambda: sparse.csr_matrix(
            (np.ones(space.size), (np.arange(space.size), classes.inverse)),
            shape=(space.size, classes.n_classes),
        ),
    )


def block_update_rows(space: StateSpace, rows: np.ndarray, block: Iterable[int]) -> np.ndarray:
    """Apply U_B to every row of a (k, |Omega|) array of distributions."""
    block = tuple(sorted(set(int(v) for v in block)))
    classes = space.block_classes(block)
    indicator = _class_indicator(space, classes.block)
    rows = np.atleast_2d(rows)
    class_mass = np.asarray((indicator.T @ rows.T).T)
    class_pi = np.bincount(classes.inverse, weights=space.pi, minlength=classes.n_classes)
    return space.pi[None, :] * (class_mass / class_pi[None, :])[:, classes.inverse]


def apply_target_rows(space: StateSpace, rows: np.ndarray, target: Target) -> np.ndarray:
    return block_update_rows(space, rows, target_sites(target))


def averaged_rows(space: StateSpace, rows: np.ndarray, blocks: Sequence[Iterable[int]]) -> np.ndarray:
    """One step of the block dynamics averaged uniformly over blocks."""
    if not blocks:
        raise ScheduleError("averaged block step needs a nonempty block collection")
    out = np.zeros_like(np.atleast_2d(rows), dtype=np.float64)
    for block in blocks:
        out += block_update_rows(space, rows, block)
    return out / len(blocks)


def schedule_rows(space: StateSpace, rows: np.ndarray, schedule: Iterable[Target]) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    for target in schedule:
        rows = apply_target_rows(space, rows, target)
    return rows


def scenario_rows(space: StateSpace, rows: np.ndarray, scenarios: Sequence[Tuple[float, Schedule]]) -> np.ndarray:
    """Probability-weighted average of schedule outcomes."""
    out = np.zeros_like(np.atleast_2d(rows), dtype=np.float64)
    for prob, schedule in scenarios:
        out += prob * schedule_rows(space, rows, schedule)
    return out


def tv_rows(rows: np.ndarray, target: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(np.atleast_2d(rows) - target[None, :]).sum(axis=1)


# ----- public operations -----

def point_mass(space: StateSpace, config: Union[Configuration, int]) -> DistVector:
    """Unit mass at a configuration (or a state index)."""
    index = config if isinstance(config, (int, np.integer)) else space.index_of(config)
    probs = np.zeros(space.size)
    probs[int(index)] = 1.0
    return DistVector(probs, space)


def top_mass(space: StateSpace) -> DistVector:
    if space.top_index is None:
        raise ModelError(f"{space.system.describe()} has no top configuration in Omega")
    return point_mass(space, space.top_index)


def bottom_mass(space: StateSpace) -> DistVector:
    if space.bottom_index is None:
        raise ModelError(f"{space.system.describe()} has no bottom configuration in Omega")
    return point_mass(space, space.bottom_index)


def update(dist: DistVector, site: int) -> DistVector:
    """Heat-bath update at one site."""
    return block_update_dist(dist, (site,))


def block_update_dist(dist: DistVector, block: Iterable[int]) -> DistVector:
    """Mixture over dist of the block updates U_B sigma."""
    return normalized(block_update_rows(dist.space, dist.probs, block)[0], dist.space)


def averaged_block_step(dist: DistVector, blocks: Sequence[Iterable[int]]) -> DistVector:
    """Uniform mixture over blocks of block_update_dist."""
    return normalized(averaged_rows(dist.space, dist.probs, list(blocks))[0], dist.space)


def evaluate_spec(dist: DistVector, spec: ScheduleSpec, mode: str = 'auto') -> Tuple[DistVector, str]:
    """
    Exact law after a randomized schedule spec.

    Modes: 'kernel' composes averaged kernels (random scan; global block
    updates with a random offset), 'scenarios' averages over the spec's
    finite scenario set. 'auto' prefers the kernel form when one exists.
    """
    space = dist.space
    graph = space.system.graph
    kernel_ok = spec.kind == 'random_scan' or (spec.kind == 'global_block' and spec.offset is None)
    if mode == 'auto':
        mode = 'kernel' if kernel_ok else 'scenarios'
    if mode == 'kernel':
        if not kernel_ok:
            raise ScheduleError(f"{spec.kind} schedules have no averaged-kernel form")
        rows = np.atleast_2d(dist.probs)
        if spec.kind == 'random_scan':
            singletons = [(v,) for v in range(space.n_sites)]
            for _ in range(spec.length):
                rows = averaged_rows(space, rows, singletons)
        else:
            one_round = ScheduleSpec('global_block', ell=spec.ell, torus=spec.torus)
            scenarios = one_round.scenarios(graph)
            for _ in range(spec.rounds):
                rows = scenario_rows(space, rows, scenarios)
        return normalized(rows[0], space), mode
    if mode != 'scenarios':
        raise ScheduleError(f"unknown evaluation mode {mode!r}")
    rows = scenario_rows(space, dist.probs, spec.scenarios(graph))
    return normalized(rows[0], space), mode


def apply_schedule(dist: DistVector, schedule: Union[Schedule, ScheduleSpec, Sequence[Target]],
                   mode: str = 'auto') -> DistVector:
    """Left-to-right composition of the schedule's updates (exact average for specs)."""
    if isinstance(schedule, ScheduleSpec):
        return evaluate_spec(dist, schedule, mode)[0]
    rows = schedule_rows(dist.space, dist.probs, schedule)
    return normalized(rows[0], dist.space)


def tv_distance(d1: DistVector, d2: DistVector) -> float:
    """Total variation distance."""
    _same_space(d1, d2)
    return float(min(1.0, 0.5 * np.abs(d1.probs - d2.probs).sum()))


def tv_to_stationary(dist: DistVector) -> float:
    return float(min(1.0, 0.5 * np.abs(dist.probs - dist.space.pi).sum()))


def marginal(dist: DistVector, sites: Sequence[int]) -> np.ndarray:
    """
    Law of the restriction to sites, indexed by pattern code
    sum_i s_{sites[i]} |S|^i.
    """
    sites = [int(v) for v in sites]
    k = dist.space.system.n_spins
    codes = dist.space.states[:, sites].astype(np.int64) @ (k ** np.arange(len(sites), dtype=np.int64))
    return np.bincount(codes, weights=dist.probs, minlength=k ** len(sites))


def random_scan_kernel(space: StateSpace, blocks: Optional[Sequence[Iterable[int]]] = None) -> np.ndarray:
    """Transition matrix of the averaged block dynamics (singletons by default)."""
    if blocks is None:
        blocks = [(v,) for v in range(space.n_sites)]
    return averaged_rows(space, np.eye(space.size), list(blocks))


def weakly_increasing_start(space: StateSpace, upset_of: Optional[int] = None,
                            top_weight: float = 1.0) -> DistVector:
    """
    Starting laws whose ratio to pi is weakly increasing.

    Args:
        upset_of: if given, pi conditioned on the principal up-set of this state
        top_weight: otherwise the mixture top_weight * delta_top + (1 - top_weight) * pi
    """
    if upset_of is not None:
        weights = np.where(space.leq[int(upset_of)], space.pi, 0.0)
        return normalized(weights, space)
    top = top_mass(space)
    return normalized(top_weight * top.probs + (1.0 - top_weight) * space.pi, space)


def tv_curve(dist: DistVector, schedule: Union[Schedule, Sequence[Target]], schedule_id: str = '') -> pd.DataFrame:
    """TV to pi after every prefix of a deterministic schedule."""
    rows = np.atleast_2d(dist.probs)
    records = [{'step': 0, 'tv': float(tv_rows(rows, dist.space.pi)[0]), 'schedule_id': schedule_id}]
    for step, target in enumerate(schedule, start=1):
        rows = apply_target_rows(dist.space, rows, target)
        records.append({'step': step, 'tv': float(tv_rows(rows, dist.space.pi)[0]), 'schedule_id': schedule_id})
    return pd.DataFrame.from_records(records, columns=['step', 'tv', 'schedule_id'])


# ----- likelihood ratios -----

@dataclass
class RatioReport:
    ok: bool
    tolerance: float
    violation: Optional[dict] = None

    def to_dict(self) -> dict:
        return {'ok': self.ok, 'tolerance': self.tolerance, 'violation': self.violation}


def likelihood_ratio(dist: DistVector) -> np.ndarray:
    return dist.probs / dist.space.pi


def likelihood_ratio_increasing(dist: DistVector, space: Optional[StateSpace] = None,
                                tolerance: Optional[float] = None) -> RatioReport:
    """
    Check mu/pi(sigma) <= mu/pi(tau) on every comparable pair; the first
    violation in (sigma, tau) index order is reported.
    """
    space = space or dist.space
    if space is not dist.space:
        raise SpaceMismatchError("distribution is not on the given space")
    if tolerance is None:
        tolerance = float(setting('tolerances.inequality', 1e-9))
    ratio = likelihood_ratio(dist)
    bad = space.leq & (ratio[:, None] > ratio[None, :] + tolerance)
    hits = np.argwhere(bad)
    if hits.size == 0:
        return RatioReport(True, tolerance)
    i, j = (int(x) for x in hits[0])
    labels = space.system.spins
    return RatioReport(False, tolerance, {
        'sigma': list(space.configuration(i).labels(labels)),
        'tau': list(space.configuration(j).labels(labels)),
        'ratio_sigma': float(ratio[i]),
        'ratio_tau': float(ratio[j]),
    })


@dataclass
class MonotoneExtension:
    """f over all of S^V, indexed by configuration code"""

    values: np.ndarray
    space: StateSpace

    @property
    def grid(self) -> np.ndarray:
        k, n = self.space.system.n_spins, self.space.n_sites
        return self.values.reshape((k,) * n)

    def on_omega(self) -> np.ndarray:
        return self.values[self.space.codes]

    def is_increasing(self, tolerance: Optional[float] = None) -> bool:
        """Exhaustive check along every axis in rank direction."""
        if tolerance is None:
            tolerance = float(setting('tolerances.inequality', 1e-9))
        grid = self.grid
        n = self.space.n_sites
        for v in range(n):
            axis = n - 1 - v
            step = np.diff(grid, axis=axis)
            if self.space.system.order_flip[v]:
                step = -step
            if np.any(step < -tolerance):
                return False
        return True

    def agrees_with_ratio(self, dist: DistVector, tolerance: Optional[float] = None) -> bool:
        if tolerance is None:
            tolerance = float(setting('tolerances.inequality', 1e-9))
        return bool(np.all(np.abs(self.on_omega() - likelihood_ratio(dist)) <= tolerance))


def monotone_extension(dist: DistVector, space: Optional[StateSpace] = None) -> MonotoneExtension:
    """
    f(sigma) = max{mu(omega)/pi(omega) : omega in Omega, omega <= sigma},
    0 when no member of Omega lies below sigma; computed over S^V as a
    running maximum along every site axis in rank order.
    """
    space = space or dist.space
    k, n = space.system.n_spins, space.n_sites
    budget = int(setting('enumeration.max_extension_configurations', 2 ** 20))
    if k ** n > budget:
        raise BudgetExceededError('monotone extension table', k ** n, budget)
    values = np.zeros(k ** n)
    values[space.codes] = likelihood_ratio(dist)
    grid = values.reshape((k,) * n)
    # codes put site 0 last in C order
    for v in range(n):
        axis = n - 1 - v
        if space.system.order_flip[v]:
            grid = np.flip(np.maximum.accumulate(np.flip(grid, axis=axis), axis=axis), axis=axis)
        else:
            grid = np.maximum.accumulate(grid, axis=axis)
    return MonotoneExtension(np.ascontiguousarray(grid).reshape(-1), space)
