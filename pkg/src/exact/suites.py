"""
Exhaustive property suites for censoring and its supporting lemmas.

Each suite propagates every update sequence up to a given length from a
starting law (the top configuration by default), and certifies:

  * dominance: the law after the full sequence is stochastically below
    the law after the censored (sub)sequence;
  * distance: the full sequence is at least as close to pi in TV.

Sequences producing identical laws are evaluated once.
"""

import time
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Any, Dict, List, Optional, Sequence, Tuple
import sys
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))
from exact.distributions import (
    DistVector,
    block_update_rows,
    evaluate_spec,
    likelihood_ratio_increasing,
    monotone_extension,
    normalized,
    top_mass,
    tv_to_stationary,
    weakly_increasing_start,
)
from exact.dominance import stochastic_dominance
from schedules.specs import ScheduleSpec
from systems.state_space import StateSpace
from utils.config import setting
from utils.logger import setup_logger

logger = setup_logger(__name__)

MAX_RECORDED_VIOLATIONS = 20


@dataclass
class SuiteReport:
    claim: str
    system: str
    cases: int
    tolerance: float
    violations: List[Dict[str, Any]] = field(default_factory=list)
    violation_count: int = 0
    wall_time: Optional[float] = None
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return 'certified' if self.violation_count == 0 else 'violated'

    @property
    def ok(self) -> bool:
        return self.violation_count == 0

    def record(self, violation: Dict[str, Any]) -> None:
        self.violation_count += 1
        if len(self.violations) < MAX_RECORDED_VIOLATIONS:
            self.violations.append(violation)

    def to_dict(self, record_timing: bool = False) -> Dict[str, Any]:
        return {
            'claim': self.claim,
            'system': self.system,
            'verdict': self.verdict,
            'cases': self.cases,
            'tolerance': self.tolerance,
            'violation_count': self.violation_count,
            'witness': self.violations,
            'details': self.details,
            'wall_time': self.wall_time if record_timing else None,
        }


def _tolerance(tolerance: Optional[float]) -> float:
    return float(setting('tolerances.inequality', 1e-9)) if tolerance is None else tolerance


def canonical(sequence: Sequence[int]) -> Tuple[int, ...]:
    """Drop consecutive repeats (a repeated update is idempotent)."""
    out: List[int] = []
    for v in sequence:
        if not out or out[-1] != v:
            out.append(int(v))
    return tuple(out)


class _LawTable:
    """Laws after update sequences from a fixed start, with identical laws shared."""

    def __init__(self, space: StateSpace, start: DistVector):
        self.space = space
        self.by_sequence: Dict[Tuple[int, ...], int] = {(): 0}
        self.by_bytes: Dict[bytes, int] = {}
        self.laws: List[DistVector] = []
        self.tvs: List[float] = []
        self._add(start.probs)

    def _add(self, probs: np.ndarray) -> int:
        key = np.round(probs, 13).tobytes()
        if key not in self.by_bytes:
            self.by_bytes[key] = len(self.laws)
            law = normalized(probs, self.space)
            self.laws.append(law)
            self.tvs.append(tv_to_stationary(law))
        return self.by_bytes[key]

    def law_id(self, sequence: Sequence[int]) -> int:
        sequence = canonical(sequence)
        if sequence not in self.by_sequence:
            parent = self.laws[self.law_id(sequence[:-1])]
            probs = block_update_rows(self.space, parent.probs, (sequence[-1],))[0]
            self.by_sequence[sequence] = self._add(probs)
        return self.by_sequence[sequence]


def _pair_check(table: _LawTable, full: int, censored: int, tolerance: float,
                checked: Dict[Tuple[int, int], Optional[Dict]]) -> Optional[Dict[str, Any]]:
    """None if law[full] <= law[censored] and TV(full) <= TV(censored) + tol."""
    key = (full, censored)
    if key in checked:
        return checked[key]
    result = None
    if full != censored:
        mu, nu = table.laws[full], table.laws[censored]
        certificate = stochastic_dominance(mu, nu, tolerance, with_coupling=False)
        tv_gap = table.tvs[full] - table.tvs[censored]
        if not certificate.dominates or tv_gap > tolerance:
            result = {
                'dominates': certificate.dominates,
                'dominance_gap': certificate.gap,
                'tv_full': table.tvs[full],
                'tv_censored': table.tvs[censored],
            }
    checked[key] = result
    return result


def _sequences(n_sites: int, max_len: int):
    for length in range(1, max_len + 1):
        yield from product(range(n_sites), repeat=length)


def _start_law(space: StateSpace, start: Optional[DistVector]) -> DistVector:
    return start if start is not None else top_mass(space)


def single_omission_suite(space: StateSpace, max_len: int, start: Optional[DistVector] = None,
                          tolerance: Optional[float] = None) -> SuiteReport:
    """Leaving out any one update of any sequence of length <= max_len."""
    tolerance = _tolerance(tolerance)
    began = time.perf_counter()
    table = _LawTable(space, _start_law(space, start))
    report = SuiteReport('censoring: single omission', space.system.describe(), 0, tolerance)
    checked: Dict = {}
    for sequence in _sequences(space.n_sites, max_len):
        full = table.law_id(sequence)
        for j in range(len(sequence)):
            sub = sequence[:j] + sequence[j + 1:]
            report.cases += 1
            problem = _pair_check(table, full, table.law_id(sub), tolerance, checked)
            if problem:
                report.record({'sequence': list(sequence), 'omitted': j, **problem})
    report.details = {'max_len': max_len, 'distinct_laws': len(table.laws), 'distinct_pairs': len(checked)}
    report.wall_time = time.perf_counter() - began
    return report


def subsequence_suite(space: StateSpace, max_len: int, start: Optional[DistVector] = None,
                      tolerance: Optional[float] = None, claim: str = 'censoring: all subsequences') -> SuiteReport:
    """Every subsequence (including the empty one) of every sequence of length <= max_len."""
    tolerance = _tolerance(tolerance)
    began = time.perf_counter()
    table = _LawTable(space, _start_law(space, start))
    report = SuiteReport(claim, space.system.describe(), 0, tolerance)
    checked: Dict = {}
    for sequence in _sequences(space.n_sites, max_len):
        full = table.law_id(sequence)
        for size in range(len(sequence)):
            for kept in combinations(range(len(sequence)), size):
                sub = tuple(sequence[i] for i in kept)
                report.cases += 1
                problem = _pair_check(table, full, table.law_id(sub), tolerance, checked)
                if problem:
                    report.record({'sequence': list(sequence), 'kept_positions': list(kept), **problem})
    report.details = {'max_len': max_len, 'distinct_laws': len(table.laws), 'distinct_pairs': len(checked)}
    report.wall_time = time.perf_counter() - began
    return report


def relaxed_start_suite(space: StateSpace, max_len: int, tolerance: Optional[float] = None) -> SuiteReport:
    """
    Subsequence suite from starting laws whose ratio to pi is weakly
    increasing: pi conditioned on principal up-sets, and mixtures of the
    top point mass with pi.
    """
    tolerance = _tolerance(tolerance)
    began = time.perf_counter()
    starts: List[Tuple[str, DistVector]] = []
    for i in sorted({space.size // 4, space.size // 2, (3 * space.size) // 4}):
        starts.append((f"upset of state {i}", weakly_increasing_start(space, upset_of=i)))
    for weight in (0.3, 0.7):
        starts.append((f"{weight} top + {1 - weight:g} pi", weakly_increasing_start(space, top_weight=weight)))

    report = SuiteReport('censoring: relaxed start', space.system.describe(), 0, tolerance)
    for label, start in starts:
        ratio = likelihood_ratio_increasing(start)
        if not ratio.ok:
            report.record({'start': label, 'problem': 'start ratio not increasing', **(ratio.violation or {})})
            continue
        sub = subsequence_suite(space, max_len, start, tolerance)
        report.cases += sub.cases
        for violation in sub.violations:
            report.record({'start': label, **violation})
        report.violation_count += sub.violation_count - len(sub.violations)
    report.details = {'max_len': max_len, 'starts': [label for label, _ in starts]}
    report.wall_time = time.perf_counter() - began
    return report


def random_schedule_suite(space: StateSpace, length: int, keep_fraction: float = 0.5,
                          tolerance: Optional[float] = None) -> SuiteReport:
    """
    Censoring under random schedules: uniform site sequences of a fixed
    length, censored (a) by an independent keep mask and (b) by dropping
    every update at one uniformly chosen site (a mask depending on the draw).
    """
    tolerance = _tolerance(tolerance)
    began = time.perf_counter()
    start = top_mass(space)
    report = SuiteReport('censoring: random schedules', space.system.describe(), 0, tolerance)

    base = ScheduleSpec('random_scan', length=length)
    full, _ = evaluate_spec(start, base, mode='scenarios')
    independent, _ = evaluate_spec(start, ScheduleSpec('censored', base=base, keep_fraction=keep_fraction),
                                   mode='scenarios')

    table = _LawTable(space, start)
    dropped = np.zeros(space.size)
    weight = 1.0 / (space.n_sites * space.n_sites ** length)
    for c in range(space.n_sites):
        for sequence in product(range(space.n_sites), repeat=length):
            kept = tuple(v for v in sequence if v != c)
            dropped += weight * table.laws[table.law_id(kept)].probs
    site_dropped = normalized(dropped, space)

    for rule, censored in (('independent mask', independent), ('drop one random site', site_dropped)):
        report.cases += 1
        certificate = stochastic_dominance(full, censored, tolerance, with_coupling=False)
        tv_full, tv_censored = tv_to_stationary(full), tv_to_stationary(censored)
        if not certificate.dominates or tv_full > tv_censored + tolerance:
            report.record({'rule': rule, 'dominates': certificate.dominates,
                           'tv_full': tv_full, 'tv_censored': tv_censored})
    report.details = {'length': length, 'keep_fraction': keep_fraction}
    report.wall_time = time.perf_counter() - began
    return report


def reachable_laws(space: StateSpace, depth: int) -> List[DistVector]:
    """Distinct laws reachable from the top point mass by at most depth updates."""
    table = _LawTable(space, top_mass(space))
    for sequence in _sequences(space.n_sites, depth):
        table.law_id(sequence)
    return table.laws


def lemma_suite(space: StateSpace, depth: int = 4, tolerance: Optional[float] = None,
                check_extension: bool = True) -> SuiteReport:
    """
    Over every law mu reachable from the top by <= depth updates and every site v:
      * mu/pi increasing implies mu_v/pi increasing;
      * mu/pi increasing implies mu_v <= mu;
      * mu_v/pi increasing and mu_v <= mu imply TV(mu_v) <= TV(mu);
      * on every single-site fiber, the ratio of mu to mu_v is increasing in
        the spin order and mu dominates mu_v there;
      * the monotone extension of mu/pi is increasing on S^V and agrees
        with mu/pi on Omega.
    """
    tolerance = _tolerance(tolerance)
    began = time.perf_counter()
    system = space.system
    report = SuiteReport('lemmas: ratio, dominance, distance, extension', system.describe(), 0, tolerance)
    laws = reachable_laws(space, depth)

    for index, mu in enumerate(laws):
        ratio_ok = likelihood_ratio_increasing(mu, tolerance=tolerance).ok
        report.cases += 1
        if not ratio_ok:
            report.record({'law': index, 'lemma': 'ratio of reachable law not increasing'})
            continue

        if check_extension:
            report.cases += 1
            extension = monotone_extension(mu)
            if not extension.is_increasing(tolerance) or not extension.agrees_with_ratio(mu, tolerance):
                report.record({'law': index, 'lemma': 'monotone extension'})

        for v in range(system.n_sites):
            updated = normalized(block_update_rows(space, mu.probs, (v,))[0], space)
            report.cases += 3
            updated_ratio_ok = likelihood_ratio_increasing(updated, tolerance=tolerance).ok
            if not updated_ratio_ok:
                report.record({'law': index, 'site': v, 'lemma': 'update keeps ratio increasing'})
            dominated = stochastic_dominance(updated, mu, tolerance, with_coupling=False).dominates
            if not dominated:
                report.record({'law': index, 'site': v, 'lemma': 'updated law is dominated'})
            if updated_ratio_ok and dominated and tv_to_stationary(updated) > tv_to_stationary(mu) + tolerance:
                report.record({'law': index, 'site': v, 'lemma': 'dominated law is closer to pi'})

            report.cases += 1
            problem = _fiber_check(space, mu, v, tolerance)
            if problem:
                report.record({'law': index, 'site': v, 'lemma': 'fiber ratio and dominance', **problem})

    report.details = {'depth': depth, 'laws': len(laws)}
    report.wall_time = time.perf_counter() - began
    return report


def _fiber_check(space: StateSpace, mu: DistVector, v: int, tolerance: float) -> Optional[Dict[str, Any]]:
    """On each fiber sigma_v^*, alpha = mu|fiber and beta = pi|fiber (the law of mu_v there)."""
    system = space.system
    order = [system.spin_of_rank(v, r) for r in range(system.n_spins)]
    fiber = space.fiber(v)[:, order]
    present = fiber >= 0
    alpha = np.where(present, mu.probs[np.maximum(fiber, 0)], 0.0)
    beta = np.where(present, space.pi[np.maximum(fiber, 0)], 0.0)
    mass = alpha.sum(axis=1)
    rows = np.flatnonzero(mass > 0)
    if rows.size == 0:
        return None
    alpha = alpha[rows] / mass[rows, None]
    beta = beta[rows] / beta[rows].sum(axis=1, keepdims=True)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(beta > 0, alpha / beta, np.nan)
    for r, row in enumerate(ratio):
        values = row[~np.isnan(row)]
        if np.any(np.diff(values) < -tolerance * max(1.0, float(values.max()))):
            return {'state': int(rows[r]), 'problem': 'ratio not increasing on fiber'}
    tail_alpha = np.cumsum(alpha[:, ::-1], axis=1)
    tail_beta = np.cumsum(beta[:, ::-1], axis=1)
    bad = np.flatnonzero(np.any(tail_alpha < tail_beta - tolerance, axis=1))
    if bad.size:
        return {'state': int(rows[bad[0]]), 'problem': 'fiber law does not dominate its update'}
    return None


def dominance_order_check(laws: Sequence[DistVector], tolerance: Optional[float] = None) -> Dict[str, int]:
    """
    Partial-order sanity over a set of laws: reflexivity, antisymmetry up to
    tolerance, and transitivity on certified triples. Returns failure counts.
    """
    tolerance = _tolerance(tolerance)
    k = len(laws)
    below = np.zeros((k, k), dtype=bool)
    for i in range(k):
        for j in range(k):
            below[i, j] = stochastic_dominance(laws[i], laws[j], tolerance, with_coupling=False).dominates
    failures = {'reflexive': int(np.sum(~np.diag(below))), 'antisymmetric': 0, 'transitive': 0}
    for i in range(k):
        for j in range(k):
            if i != j and below[i, j] and below[j, i]:
                if np.max(np.abs(laws[i].probs - laws[j].probs)) > 1e3 * tolerance:
                    failures['antisymmetric'] += 1
            for l in range(k):
                if below[i, j] and below[j, l] and not below[i, l]:
                    failures['transitive'] += 1
    return failures
