"""
Block-dynamics contraction: discrepancy influences, the single-discrepancy
contraction condition, approximate block updates built from single-site
updates, and global (simultaneous, separated) block updates on tori.

Normalization: every expected decrease is stated per block-dynamics step
with |V| blocks of mean size b, and gamma is defined by
E[decrease at u] = gamma_u * b / |V|, gamma = min_u gamma_u.
"""

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.stats import binom

sys.path.append(str(Path(__file__).parent.parent))
from exact.distributions import (
    DistVector,
    averaged_rows,
    block_update_rows,
    normalized,
    scenario_rows,
    tv_rows,
)
from models.graphs import torus_blocks
from schedules.generators import all_offsets, global_block_blocks
from systems.certification import block_pattern_table, class_representatives
from systems.gibbs import Block
from systems.state_space import StateSpace
from transport.kantorovich import hamming_matrix, kantorovich_rows, optimal_transport, pattern_hamming_matrix
from utils.config import setting
from utils.exceptions import ModelError
from utils.logger import setup_logger
from utils.rng import make_rng

logger = setup_logger(__name__)

NORMALIZATION = "decrease per block step, |V| blocks, gamma_u = E[decrease at u] * |V| / mean block size"


@dataclass
class InfluenceResult:
    """rho = max Kantorovich distance between U_B sigma and U_B sigma_u^s (the influence Phi_u(B))"""

    u: int
    block: Block
    rho: float
    witness: Optional[Dict[str, Any]] = None

    @property
    def excess(self) -> float:
        """Discrepancies created inside the block beyond the one at u."""
        return 0.0 if self.u in self.block else max(0.0, self.rho - 1.0)


def _labels(space: StateSpace, sites: Sequence[int], spins: Sequence[int]) -> Dict[str, str]:
    values = space.system.spins.values
    return {str(v): values[int(s)] for v, s in zip(sites, spins)}


def discrepancy_influence(space: StateSpace, u: int, block: Sequence[int]) -> InfluenceResult:
    """
    Phi_u(B) using the Markov field property: U_B sigma depends only on the
    boundary spins, so the maximum runs over pairs of boundary assignments
    that differ at u and are realized by some sigma, sigma_u^s in Omega.
    The witness is the boundary assignment and the two spins at u.
    """
    block = tuple(sorted(set(int(v) for v in block)))
    if u in block:
        return InfluenceResult(u, block, 0.0)
    graph = space.system.graph
    boundary = graph.boundary(block)
    if u not in boundary:
        return InfluenceResult(u, block, 1.0)

    classes = space.block_classes(block)
    table = block_pattern_table(space, block)
    reps = class_representatives(space, block)
    k = space.system.n_spins
    boundary_codes = space.states[reps][:, list(boundary)].astype(np.int64) @ (k ** np.arange(len(boundary)))
    _, class_bid = np.unique(boundary_codes, return_inverse=True)
    class_bid = class_bid.reshape(-1)
    first_class = {}
    for c, b in enumerate(class_bid):
        first_class.setdefault(int(b), c)

    state_bid = class_bid[classes.inverse]
    fiber = space.fiber(u)
    pairs = set()
    for s in range(k):
        targets = fiber[:, s]
        valid = np.flatnonzero((targets >= 0) & (targets != np.arange(space.size)))
        for a, b in zip(state_bid[valid], state_bid[targets[valid]]):
            if a != b:
                pairs.add((min(int(a), int(b)), max(int(a), int(b))))

    cost = pattern_hamming_matrix(len(block), k)
    best, witness = 0.0, None
    for a, b in sorted(pairs):
        ca, cb = first_class[a], first_class[b]
        w, _ = optimal_transport(table[ca], table[cb], cost)
        if witness is None or w > best:
            best = w
            sa, sb = space.states[reps[ca]], space.states[reps[cb]]
            witness = {
                'boundary': _labels(space, boundary, sa[list(boundary)]),
                'u_spins': [space.system.spins.values[int(sa[u])], space.system.spins.values[int(sb[u])]],
            }
    return InfluenceResult(u, block, 1.0 + best if pairs else 1.0, witness)


def brute_force_influence(space: StateSpace, u: int, block: Sequence[int]) -> InfluenceResult:
    """Phi_u(B) over every sigma in Omega and spin s, without the Markov field shortcut."""
    block = tuple(sorted(set(int(v) for v in block)))
    updated = block_update_rows(space, np.eye(space.size), block)
    fiber = space.fiber(u)
    best, witness = 0.0, None
    for i in range(space.size):
        for s in range(space.system.n_spins):
            j = int(fiber[i, s])
            if j < 0 or j == i:
                continue
            rho = float(kantorovich_rows(space, updated[i], updated[j])[0])
            if witness is None or rho > best:
                best = rho
                witness = {'sigma': list(space.configuration(i).labels(space.system.spins)),
                           'spin': space.system.spins.values[s]}
    return InfluenceResult(u, block, best, witness)


@dataclass
class ContractionReport:
    per_pair: Dict[Tuple[int, int], float]
    witnesses: Dict[Tuple[int, int], Optional[Dict[str, Any]]]
    blocks: List[Block]
    block_labels: List[int]
    gamma: float
    gamma_per_site: List[float]
    expected_decrease: List[float]
    block_size: float
    n_sites: int
    satisfied: bool
    gamma_target: float
    violating_sites: List[int]
    normalization: str = NORMALIZATION
    delta: Optional[float] = None
    t_single: Optional[int] = None
    tail_probability: Optional[float] = None

    def excess_sum(self, u: int) -> float:
        """Sum over blocks with u on the boundary of (Phi_u(B) - 1)."""
        total = 0.0
        for (site, label), rho in self.per_pair.items():
            block = self.blocks[self.block_labels.index(label)]
            if site == u and site not in block and rho > 1.0:
                total += rho - 1.0
        return total

    def to_frame(self) -> pd.DataFrame:
        records = []
        for (u, label), rho in sorted(self.per_pair.items()):
            witness = self.witnesses.get((u, label))
            records.append({'u': u, 'B_anchor': label, 'phi': rho,
                            'witness': '' if witness is None else str(witness)})
        return pd.DataFrame.from_records(records, columns=['u', 'B_anchor', 'phi', 'witness'])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'gamma': self.gamma,
            'gamma_target': self.gamma_target,
            'satisfied': self.satisfied,
            'block_size': self.block_size,
            'n_sites': self.n_sites,
            'violating_sites': self.violating_sites,
            'gamma_per_site': self.gamma_per_site,
            'expected_decrease': self.expected_decrease,
            'normalization': self.normalization,
            'delta': self.delta,
            't_single': self.t_single,
            'tail_probability': self.tail_probability,
        }


def contraction_check(space: StateSpace, blocks: Sequence[Sequence[int]], gamma_target: float = 0.0,
                      block_labels: Optional[Sequence[int]] = None, n_jobs: int = 1) -> ContractionReport:
    """
    Single-discrepancy contraction of the block dynamics averaged over blocks:
    E[decrease at u] = P(B contains u) - (1/|blocks|) sum_{B: u in dB} (Phi_u(B) - 1).
    Satisfied when gamma = min_u gamma_u exceeds gamma_target and 0.
    """
    blocks = [tuple(sorted(set(int(v) for v in b))) for b in blocks]
    if not blocks:
        raise ModelError("contraction check needs at least one block")
    labels = list(block_labels) if block_labels is not None else list(range(len(blocks)))
    graph = space.system.graph
    n = space.n_sites

    jobs = [(u, b) for b, block in enumerate(blocks) for u in graph.boundary(block)]
    results = Parallel(n_jobs=n_jobs, prefer='threads')(
        delayed(discrepancy_influence)(space, u, blocks[b]) for u, b in jobs
    )
    influence = {(u, b): r for (u, b), r in zip(jobs, results)}

    per_pair: Dict[Tuple[int, int], float] = {}
    witnesses: Dict[Tuple[int, int], Optional[Dict]] = {}
    for b, block in enumerate(blocks):
        for u in range(n):
            if (u, b) in influence:
                result = influence[(u, b)]
                per_pair[(u, labels[b])] = result.rho
                witnesses[(u, labels[b])] = result.witness
            else:
                per_pair[(u, labels[b])] = 0.0 if u in block else 1.0
                witnesses[(u, labels[b])] = None

    mean_size = float(np.mean([len(b) for b in blocks]))
    decrease, gammas = [], []
    for u in range(n):
        inside = sum(1 for block in blocks if u in block) / len(blocks)
        excess = sum(influence[(u, b)].excess for b in range(len(blocks)) if (u, b) in influence) / len(blocks)
        decrease.append(inside - excess)
        gammas.append((inside - excess) * n / mean_size)
    gamma = float(min(gammas))
    violating = [u for u, g in enumerate(gammas) if g <= gamma_target or g <= 0.0]
    satisfied = not violating
    logger.info(f"contraction on {space.system.describe()}: gamma={gamma:.6g}, satisfied={satisfied}")
    return ContractionReport(
        per_pair=per_pair,
        witnesses=witnesses,
        blocks=blocks,
        block_labels=labels,
        gamma=gamma,
        gamma_per_site=[float(g) for g in gammas],
        expected_decrease=[float(d) for d in decrease],
        block_size=mean_size,
        n_sites=n,
        satisfied=satisfied,
        gamma_target=gamma_target,
        violating_sites=violating,
    )


@dataclass
class PathCouplingReport:
    ok: bool
    factor: float
    pairs_checked: int
    worst_ratio: float
    tolerance: float


def path_coupling_check(space: StateSpace, blocks: Sequence[Sequence[int]], gamma: float,
                        max_pairs: int = 2000, seed: int = 0, tolerance: Optional[float] = None) -> PathCouplingReport:
    """
    Contraction of arbitrary pairs from the single-discrepancy condition:
    rho(P sigma, P tau) <= (1 - gamma b / |V|) H(sigma, tau) on pairs at distance >= 2.
    """

    if tolerance is None:
        tolerance = float(setting('tolerances.inequality', 1e-9))
    blocks = [tuple(b) for b in blocks]
    factor = 1.0 - gamma * float(np.mean([len(b) for b in blocks])) / space.n_sites
    stepped = averaged_rows(space, np.eye(space.size), blocks)
    distances = hamming_matrix(space)
    pairs = np.argwhere(np.triu(distances >= 2))
    if len(pairs) > max_pairs:
        pairs = pairs[np.sort(make_rng(seed, 'pairs').choice(len(pairs), size=max_pairs, replace=False))]
    worst = 0.0
    ok = True
    for i, j in pairs:
        rho = float(kantorovich_rows(space, stepped[i], stepped[j])[0])
        h = float(distances[i, j])
        worst = max(worst, rho / h)
        if rho > factor * h + tolerance:
            ok = False
    return PathCouplingReport(ok, factor, int(len(pairs)), worst, tolerance)


# ----- approximate block updates -----

def delta_for(gamma: float, ell: int, d: int, boundary_size: int, rule: Optional[str] = None) -> float:
    """
    Approximation budget for U*_B.

    'boundary': gamma ell^d / (4 |dB|);  'ratio': gamma / (1 + ((ell+2)/ell)^d).
    """
    rule = rule or str(setting('contraction.delta_rule', 'boundary'))
    if rule == 'boundary':
        return gamma * ell ** d / (4.0 * boundary_size)
    if rule == 'ratio':
        return gamma / (1.0 + ((ell + 2.0) / ell) ** d)
    raise ModelError(f"unknown delta rule {rule!r}")


def default_t_single(ell: int, d: int, delta: float) -> int:
    """Lower bounds max(ell^d ln ell^d, 4 ln(ell^d / delta)), rounded up."""
    volume = ell ** d
    return max(1, math.ceil(volume * math.log(volume)) if volume > 1 else 1,
               math.ceil(4.0 * math.log(volume / delta)))


def binomial_tail(t: int, n_sites: int, ell: int, d: int) -> Tuple[float, float, int]:
    """
    Updates landing in a fixed block during T = 2 t |V| / ell^d uniform
    single-site updates: P(Bin(T, ell^d/|V|) < t) and the bound exp(-t/4).

    Returns:
        (exact tail, exp(-t/4), T)
    """
    volume = ell ** d
    trials = math.ceil(2.0 * t * n_sites / volume)
    exact = float(binom.cdf(t - 1, trials, volume / n_sites))
    return exact, math.exp(-t / 4.0), trials


def block_kernel_rows(space: StateSpace, rows: np.ndarray, block: Sequence[int]) -> np.ndarray:
    """One uniformly random single-site update inside the block."""
    return averaged_rows(space, rows, [(v,) for v in block])


def approximation_curve(space: StateSpace, block: Sequence[int], t_max: int) -> List[float]:
    """max over sigma of rho(U*_B sigma, U_B sigma) for t = 0..t_max single-site updates."""
    block = tuple(sorted(block))
    exact = block_update_rows(space, np.eye(space.size), block)
    rows = np.eye(space.size)
    curve = [float(np.max(kantorovich_rows(space, rows, exact)))]
    for _ in range(t_max):
        rows = block_kernel_rows(space, rows, block)
        curve.append(float(np.max(kantorovich_rows(space, rows, exact))))
    return curve


def approximation_trend(space: StateSpace, block: Sequence[int], ts: Sequence[int]) -> Dict[int, float]:
    """rho(U*_B, U_B) at the requested numbers of single-site updates."""
    ts = sorted(int(t) for t in ts)
    curve = approximation_curve(space, block, ts[-1]) if ts else []
    return {t: curve[t] for t in ts}


@dataclass
class ApproximationReport:
    block: Block
    gamma: float
    delta: float
    delta_rule: str
    delta_other_rule: float
    t_single: int
    t_min: Optional[int]
    rho: float
    tail_exact: float
    tail_bound: float
    trials: int
    chain: Dict[str, float]
    certified: bool
    curve: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'block': list(self.block),
            'gamma': self.gamma,
            'delta': self.delta,
            'delta_rule': self.delta_rule,
            'delta_other_rule': self.delta_other_rule,
            't_single': self.t_single,
            't_min': self.t_min,
            'rho': self.rho,
            'tail_exact': self.tail_exact,
            'tail_bound': self.tail_bound,
            'trials': self.trials,
            'chain': self.chain,
            'certified': self.certified,
        }


def approximate_block_contraction(
    space: StateSpace,
    block: Sequence[int],
    gamma: float,
    d: int = 1,
    ell: Optional[int] = None,
    t_single: Optional[int] = None,
    delta: Optional[float] = None,
    rule: Optional[str] = None,
    excess_sum: Optional[float] = None,
    cap: Optional[int] = None,
    tolerance: Optional[float] = None,
) -> ApproximationReport:
    """
    Replace U_B by t uniformly random single-site updates inside B and
    re-derive the contraction of the resulting dynamics:

      E[decrease] >= ell^d/|V| - 2|dB| delta/|V| - (sum of excess influences)/|V| >= gamma ell^d / (2|V|)
      and, with T = 2t|V|/ell^d random updates, subtracting the tail term
      P(fewer than t updates in B) |dB| ell^d / |V| still leaves gamma ell^d / (4|V|).

    Args:
        gamma: contraction parameter from contraction_check
        excess_sum: worst sum over blocks of (Phi_u(B) - 1); defaults to (1 - gamma) ell^d
        t_single: fixed t; when omitted the smallest t meeting every requirement is used
    """
    if gamma <= 0:
        raise ModelError(f"approximate block contraction needs gamma > 0, got {gamma}")
    if tolerance is None:
        tolerance = float(setting('tolerances.inequality', 1e-9))
    if cap is None:
        cap = int(setting('contraction.t_search_cap', 4096))
    rule = rule or str(setting('contraction.delta_rule', 'boundary'))
    block = tuple(sorted(set(int(v) for v in block)))
    n = space.n_sites
    if ell is None:
        ell = int(round(len(block) ** (1.0 / d)))
    volume = ell ** d
    boundary_size = len(space.system.graph.boundary(block))
    if boundary_size == 0:
        boundary_size = 1
    if delta is None:
        delta = delta_for(gamma, ell, d, boundary_size, rule)
    other = delta_for(gamma, ell, d, boundary_size, 'ratio' if rule == 'boundary' else 'boundary')

    # rho curve up to the point where every requirement is met
    exact = block_update_rows(space, np.eye(space.size), block)
    rows = np.eye(space.size)
    curve = [float(np.max(kantorovich_rows(space, rows, exact)))]
    t_min = None
    floor = default_t_single(ell, d, delta)
    t = 0
    while True:
        if t_min is None and curve[t] <= delta:
            t_min = t
        tail, _, _ = binomial_tail(max(t, 1), n, ell, d)
        done = t_single is not None and t >= t_single
        if t_single is None and curve[t] <= delta and t >= floor and tail <= delta / volume:
            done = True
        if done or t >= cap:
            break
        rows = block_kernel_rows(space, rows, block)
        curve.append(float(np.max(kantorovich_rows(space, rows, exact))))
        t += 1

    t_used = t
    rho = curve[t_used]
    tail, tail_bound, trials = binomial_tail(max(t_used, 1), n, ell, d)
    excess = (1.0 - gamma) * volume if excess_sum is None else float(excess_sum)
    half = gamma * volume / (2.0 * n)
    quarter = gamma * volume / (4.0 * n)
    step_delta = volume / n - 2.0 * boundary_size * delta / n - excess / n
    step_measured = volume / n - 2.0 * boundary_size * rho / n - excess / n
    final = step_delta - tail * boundary_size * volume / n
    chain = {
        'decrease_with_delta': step_delta,
        'decrease_with_measured_rho': step_measured,
        'half_target': half,
        'decrease_after_tail': final,
        'quarter_target': quarter,
        'tail_budget': delta / volume,
    }
    certified = (
        rho <= delta + tolerance
        and step_delta >= half - tolerance
        and tail <= delta / volume + tolerance
        and final >= quarter - tolerance
    )
    if t_min is None:
        logger.warning(f"rho(U*_B, U_B) never reached delta={delta:.4g} within {t_used} single-site updates")
    return ApproximationReport(
        block=block, gamma=gamma, delta=delta, delta_rule=rule, delta_other_rule=other,
        t_single=t_used, t_min=t_min, rho=rho, tail_exact=tail, tail_bound=tail_bound, trials=trials,
        chain=chain, certified=bool(certified), curve=curve,
    )


# ----- global block updates -----

def global_block_rows(space: StateSpace, rows: np.ndarray, d: int, N: int, ell: int,
                      offsets: Optional[Sequence[Sequence[int]]] = None) -> np.ndarray:
    """One global block update averaged over offsets (all of {0..ell}^d by default)."""
    offsets = [tuple(j) for j in (offsets or all_offsets(d, ell))]
    scenarios = [(1.0 / len(offsets), global_block_blocks(d, N, ell, j)) for j in offsets]
    return scenario_rows(space, rows, scenarios)


def global_block_step(dist: DistVector, d: int, N: int, ell: int,
                      offsets: Optional[Sequence[Sequence[int]]] = None) -> DistVector:
    return normalized(global_block_rows(dist.space, dist.probs, d, N, ell, offsets)[0], dist.space)


@dataclass
class GlobalBlockReport:
    d: int
    N: int
    ell: int
    offsets: int
    coverage: List[float]
    decrease_bound: List[float]
    exact_decrease: Optional[List[float]]
    target: float
    satisfied: bool
    exact_consistent: Optional[bool]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'd': self.d, 'N': self.N, 'ell': self.ell, 'offsets': self.offsets,
            'coverage': self.coverage, 'decrease_bound': self.decrease_bound,
            'exact_decrease': self.exact_decrease, 'target': self.target,
            'satisfied': self.satisfied, 'exact_consistent': self.exact_consistent,
        }


def global_block_contraction(space: StateSpace, d: int, N: int, ell: int, report: ContractionReport,
                             exact: bool = True, tolerance: Optional[float] = None) -> GlobalBlockReport:
    """
    Expected single-discrepancy decrease of a global block update with a
    uniformly random offset, from the influence table of the torus block
    dynamics (report must cover all N^d anchored cubes, labelled by anchor):

        (1/(ell+1)^d) sum_j [1{u in union B_j} - sum_{B in B_j, u in dB} (Phi_u(B) - 1)]

    which must reach gamma (ell/(ell+1))^d. With exact=True the true decrease
    of the exact averaged global update is computed and checked against it.
    """
    if tolerance is None:
        tolerance = float(setting('tolerances.inequality', 1e-9))
    offsets = all_offsets(d, ell)
    graph = space.system.graph
    n = space.n_sites
    coverage = np.zeros(n)
    bound = np.zeros(n)
    for j in offsets:
        blocks = global_block_blocks(d, N, ell, j)
        for block in blocks:
            anchor = block_anchor(d, N, ell, block)
            for v in block:
                coverage[v] += 1
                bound[v] += 1
            for u in graph.boundary(block):
                bound[u] -= max(0.0, report.per_pair[(u, anchor)] - 1.0)
    coverage /= len(offsets)
    bound /= len(offsets)
    target = report.gamma * (ell / (ell + 1.0)) ** d
    satisfied = bool(np.min(bound) >= target - tolerance)

    exact_decrease = None
    consistent = None
    if exact:
        stepped = global_block_rows(space, np.eye(space.size), d, N, ell, offsets)
        exact_decrease = []
        for u in range(n):
            fiber = space.fiber(u)
            worst = 0.0
            for s in range(space.system.n_spins):
                valid = np.flatnonzero((fiber[:, s] >= 0) & (fiber[:, s] != np.arange(space.size)))
                if valid.size:
                    rho = kantorovich_rows(space, stepped[valid], stepped[fiber[valid, s]])
                    worst = max(worst, float(np.max(rho)))
            exact_decrease.append(1.0 - worst)
        consistent = bool(np.all(np.array(exact_decrease) >= bound - tolerance))

    return GlobalBlockReport(d, N, ell, len(offsets), coverage.tolist(), bound.tolist(), exact_decrease,
                             float(target), satisfied, consistent)


def block_anchor(d: int, N: int, ell: int, block: Sequence[int]) -> int:
    """Anchor of a torus cube (its identity among the N^d anchored cubes)."""
    anchors = _anchor_lookup(d, N, ell)
    key = tuple(sorted(block))
    if key not in anchors:
        raise ModelError(f"{key} is not an anchored cube of side {ell}")
    return anchors[key]


@lru_cache(maxsize=None)
def _anchor_lookup(d: int, N: int, ell: int) -> Dict[Block, int]:
    lookup: Dict[Block, int] = {}
    for anchor, block in enumerate(torus_blocks(d, N, ell)):
        lookup.setdefault(block, anchor)
    return lookup


# ----- censored approximate global updates -----

def censored_global_rows(space: StateSpace, rows: np.ndarray, d: int, N: int, ell: int, steps: int) -> np.ndarray:
    """
    steps uniform single-site updates of the whole torus, keeping only those
    inside the union of the blocks of a uniformly random offset.
    """
    n = space.n_sites
    out = np.zeros_like(np.atleast_2d(rows), dtype=np.float64)
    offsets = all_offsets(d, ell)
    for j in offsets:
        union = sorted({v for block in global_block_blocks(d, N, ell, j) for v in block})
        keep = len(union) / n
        current = np.atleast_2d(rows).astype(np.float64)
        for _ in range(steps):
            current = keep * averaged_rows(space, current, [(v,) for v in union]) + (1.0 - keep) * current
        out += current / len(offsets)
    return out


def random_scan_rows(space: StateSpace, rows: np.ndarray, steps: int) -> np.ndarray:
    singletons = [(v,) for v in range(space.n_sites)]
    rows = np.atleast_2d(rows).astype(np.float64)
    for _ in range(steps):
        rows = averaged_rows(space, rows, singletons)
    return rows


def censored_vs_uncensored(space: StateSpace, d: int, N: int, ell: int, steps_per_update: int,
                           updates: int) -> Dict[str, float]:
    """
    TV to pi from the top after `updates` censored approximate global updates
    versus the same number of uncensored random-scan steps.
    """
    start = np.zeros((1, space.size))
    start[0, space.top_index] = 1.0
    censored = start
    for _ in range(updates):
        censored = censored_global_rows(space, censored, d, N, ell, steps_per_update)
    uncensored = random_scan_rows(space, start, steps_per_update * updates)
    return {
        'tv_censored': float(tv_rows(censored, space.pi)[0]),
        'tv_uncensored': float(tv_rows(uncensored, space.pi)[0]),
        'total_steps': steps_per_update * updates,
    }
