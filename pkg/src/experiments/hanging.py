"""
hanging: a subgraph H attached to the rest of G through a single cut vertex x.

Zero-field Ising only: there the law of G restricted to H is the law of H.
For schedules Q on the sites of H the command checks, exactly,

  - identity: running Q on H alone gives the same law on H as running Q on G
    with every x-update replaced by a block update of {x} u (G \\ H);
  - j-fold surrogate: replacing each such block update by j single-site
    updates cycling through x, then G \\ H, never brings H closer to
    stationarity than Q itself, gets closer as j grows, and so the mixing
    time of H alone is at most that of H inside G.
"""

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple
import sys

import numpy as np
import pandas as pd

sys.path.append(str(Path(__file__).parent.parent))
from exact.distributions import apply_target_rows, averaged_rows, marginal, normalized
from experiments.common import EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, monotone_space
from experiments.config import ExperimentConfig
from experiments.reports import ReportWriter, report
from models.graphs import cut_vertices_between, induced_subgraph
from models.spin_models import ModelSpec, build_ising, build_system
from schedules.schedule import Target
from systems.gibbs import GibbsSystem
from systems.state_space import StateSpace
from utils.exceptions import CensorLabError, ConfigError
from utils.logger import setup_logger

logger = setup_logger(__name__)

CLAIM = 'a hanging subgraph mixes no slower alone than inside the whole graph'
J_VALUES = (1, 4, 16, 64)


@dataclass
class HangingCase:
    label: str
    system: GibbsSystem
    sites: Tuple[int, ...]
    cut: Optional[int]
    outside: Tuple[int, ...]

    @property
    def block(self) -> Tuple[int, ...]:
        """x first, then G \\ H in increasing order."""
        return (self.cut,) + self.outside if self.cut is not None else ()


def _cases(config: ExperimentConfig) -> List[HangingCase]:
    raw = config.param('cases')
    if raw is None:
        if config.param('H') is None:
            raise ConfigError("hanging needs params.H or params.cases")
        raw = [{'model': spec.to_dict(), 'H': config.param('H')} for spec in config.models]
    cases = []
    for entry in raw:
        try:
            spec = ModelSpec.from_dict(entry['model'])
            system = build_system(spec)
        except KeyError as e:
            raise ConfigError(f"hanging case needs 'model' and 'H': {entry}") from e
        except CensorLabError as e:
            raise ConfigError(f"invalid hanging case model: {e}") from e
        if spec.kind != 'ising' or spec.h != 0.0 or spec.beta < 0:
            raise ConfigError(f"hanging needs a zero-field ferromagnetic Ising model, got {spec.label()}")
        sites = tuple(sorted(set(int(v) for v in entry['H'])))
        if not sites or sites[-1] >= system.n_sites or sites[0] < 0:
            raise ConfigError(f"H must be a nonempty set of sites of G, got {entry['H']}")
        cuts = cut_vertices_between(system.graph, sites)
        if len(cuts) > 1:
            raise ConfigError(f"H = {list(sites)} meets the rest of G in {len(cuts)} cut vertices {list(cuts)}")
        outside = tuple(v for v in range(system.n_sites) if v not in sites)
        label = entry.get('label') or f"{spec.label()}-H{'_'.join(map(str, sites))}"
        cases.append(HangingCase(label, system, sites, cuts[0] if cuts else None, outside))
    return cases


class _Restriction:
    """H-marginals of G laws and H laws, both indexed by H configuration code."""

    def __init__(self, space_g: StateSpace, space_h: StateSpace, sites: Sequence[int]):
        self.space_g = space_g
        self.space_h = space_h
        self.sites = list(sites)
        self.pi = self.from_h(space_h.pi)

    def from_h(self, probs: np.ndarray) -> np.ndarray:
        out = np.zeros(self.space_h.system.n_spins ** self.space_h.n_sites)
        out[self.space_h.codes] = probs
        return out

    def from_g(self, probs: np.ndarray) -> np.ndarray:
        return marginal(normalized(probs, self.space_g), self.sites)

    def tv(self, law: np.ndarray) -> float:
        return float(0.5 * np.abs(law - self.pi).sum())


def _g_round(case: HangingCase, replacement: List[Target]) -> List[Target]:
    """One systematic round over H in G coordinates, x replaced as given."""
    steps: List[Target] = []
    for v in case.sites:
        steps.extend(replacement if v == case.cut else [(v,)])
    return steps


def j_fold(block: Sequence[int], j: int) -> List[Target]:
    """j single-site updates cycling through the block; the j-sequence is a prefix of every longer one."""
    return [(block[i % len(block)],) for i in range(j)]


def hanging_case(case: HangingCase, config: ExperimentConfig) -> Dict[str, Any]:
    equality = config.tolerance('equality')
    tolerance = config.tolerance('inequality')
    epsilon = config.epsilon
    j_values = [int(j) for j in config.param('j_values', J_VALUES)]
    cap = int(config.param('round_cap', 200))
    random_length = int(config.param('random_length', 6))

    space_g, monotone = monotone_space(case.label, case.system, tolerance)
    if not monotone.ok:
        return {'label': case.label, 'refused': 'system not monotone', 'monotonicity': monotone.to_dict()}
    graph_h, mapping = induced_subgraph(case.system.graph, case.sites)
    system_h = build_ising(graph_h, case.system.params['beta'], 0.0)
    space_h, _ = monotone_space(f"{case.label}[H]", system_h, tolerance)
    restrict = _Restriction(space_g, space_h, case.sites)

    trivial = case.cut is None
    block: Tuple[Target, ...] = (tuple(sorted(case.block)),) if not trivial else ()
    h_round = [(mapping[v],) for v in case.sites]
    g_round = _g_round(case, list(block))

    # identity under a random scan of H
    h_singles = [(mapping[v],) for v in case.sites]
    g_targets = [block[0] if v == case.cut else (v,) for v in case.sites]
    h_rows = _top_rows(space_h)
    g_rows = _top_rows(space_g)
    random_gap = 0.0
    for _ in range(random_length):
        h_rows = averaged_rows(space_h, h_rows, h_singles)
        g_rows = averaged_rows(space_g, g_rows, g_targets)
        random_gap = max(random_gap, _gap(restrict, h_rows, g_rows))

    # systematic rounds: H alone, block replacement, j-fold replacements
    rows = {'H': _top_rows(space_h), 'block': _top_rows(space_g)}
    schedules = {'H': h_round, 'block': g_round}
    spaces = {'H': space_h, 'block': space_g}
    for j in j_values:
        key = f"j={j}"
        rows[key] = _top_rows(space_g)
        schedules[key] = _g_round(case, j_fold(case.block, j)) if not trivial else g_round
        spaces[key] = space_g

    records = [{'round': 0, 'variant': key, 'tv_h': restrict.tv(_law(restrict, key, r))} for key, r in rows.items()]
    hit: Dict[str, Optional[int]] = {key: (0 if records[i]['tv_h'] <= epsilon else None)
                                     for i, key in enumerate(rows)}
    systematic_gap = 0.0
    order_violations: List[Dict[str, Any]] = []
    for r in range(1, cap + 1):
        tvs = {}
        for key in rows:
            for target in schedules[key]:
                rows[key] = apply_target_rows(spaces[key], rows[key], target)
            tvs[key] = restrict.tv(_law(restrict, key, rows[key]))
            records.append({'round': r, 'variant': key, 'tv_h': tvs[key]})
            if hit[key] is None and tvs[key] <= epsilon:
                hit[key] = r
        systematic_gap = max(systematic_gap, _gap(restrict, rows['H'], rows['block']))
        folds = [f"j={j}" for j in sorted(j_values)]
        for a, b in zip(folds, folds[1:]):
            if tvs[b] > tvs[a] + tolerance:
                order_violations.append({'round': r, 'check': f"TV_H({b}) <= TV_H({a})", 'lhs': tvs[b], 'rhs': tvs[a]})
        for key in folds:
            if tvs['H'] > tvs[key] + tolerance:
                order_violations.append({'round': r, 'check': f"TV_H(Q) <= TV_H({key})", 'lhs': tvs['H'], 'rhs': tvs[key]})
        if all(v is not None for v in hit.values()):
            break

    checks = [
        {'check': 'random-scan identity', 'max_diff': random_gap,
         'status': 'holds' if random_gap <= equality else 'violated'},
        {'check': 'systematic identity', 'max_diff': systematic_gap,
         'status': 'holds' if systematic_gap <= equality else 'violated'},
    ]
    checks.extend({**v, 'status': 'violated'} for v in order_violations[:20])
    for j in j_values:
        t_h, t_j = hit['H'], hit[f"j={j}"]
        if t_h is None or t_j is None:
            status = 'capped'
        else:
            status = 'holds' if t_h <= t_j else 'violated'
        checks.append({'check': f"T_H <= T_G|H (j={j})", 'lhs': t_h, 'rhs': t_j, 'status': status})

    last = records[-len(rows):]
    final = {rec['variant']: rec['tv_h'] for rec in last}
    return {
        'label': case.label,
        'system': case.system.describe(),
        'H': list(case.sites),
        'cut_vertex': case.cut,
        'outside': list(case.outside),
        'trivial': trivial,
        'epsilon': epsilon,
        'mixing_rounds': hit,
        'final_round': last[0]['round'],
        'final_tv_h': final,
        'j_gap_to_block': {f"j={j}": final[f"j={j}"] - final['block'] for j in j_values},
        'checks': checks,
        'curves': pd.DataFrame.from_records(records, columns=['round', 'variant', 'tv_h']).assign(case=case.label),
    }


def _top_rows(space: StateSpace) -> np.ndarray:
    rows = np.zeros((1, space.size))
    rows[0, space.top_index] = 1.0
    return rows


def _law(restrict: _Restriction, key: str, rows: np.ndarray) -> np.ndarray:
    return restrict.from_h(rows[0]) if key == 'H' else restrict.from_g(rows[0])


def _gap(restrict: _Restriction, h_rows: np.ndarray, g_rows: np.ndarray) -> float:
    return float(np.max(np.abs(restrict.from_h(h_rows[0]) - restrict.from_g(g_rows[0]))))


def cmd_hanging(config: ExperimentConfig, writer: ReportWriter) -> int:
    began = time.perf_counter()
    cases = _cases(config)
    logger.info(f"hanging subgraph checks on {len(cases)} cases")
    results = [hanging_case(case, config) for case in cases]

    frames, violated = [], []
    refused = [r['label'] for r in results if r.get('refused')]
    for result in results:
        curves = result.pop('curves', None)
        if curves is not None:
            frames.append(curves)
        writer.json(f"case-{writer.slug(result['label'])}", result)
        for check in result.get('checks', []):
            if check['status'] == 'violated':
                violated.append({'case': result['label'], **check})
                logger.error(f"{result['label']}: {check['check']} violated")
    if frames:
        frame = pd.concat(frames, ignore_index=True)[['case', 'round', 'variant', 'tv_h']]
        writer.csv('tv_curves', frame)

    if refused:
        verdict, code = 'refused', EXIT_CONFIG
    elif violated:
        verdict, code = 'violated', EXIT_VIOLATION
    else:
        verdict, code = 'certified', EXIT_OK
    writer.json('report', report(CLAIM, verdict, witness=violated[:20] or None,
                                 tolerance=config.tolerance('equality'), seed=None,
                                 wall_time=writer.timing(time.perf_counter() - began),
                                 cases=[r['label'] for r in results], j_values=list(config.param('j_values', J_VALUES))))
    return code
