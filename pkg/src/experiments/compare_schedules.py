"""
compare-schedules: exact mixing times of alternating, systematic and random
scans (and the birthday-thinned systematic round) from the top state.
"""

import math
import time
from pathlib import Path
from typing import Any, Dict, List, Optional
import sys

import numpy as np
import pandas as pd

sys.path.append(str(Path(__file__).parent.parent))
from exact.mixing import MixingTimeResult, mixing_time_exact
from experiments.common import EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, fan_out, monotone_space
from experiments.config import ExperimentConfig
from experiments.reports import ReportWriter, report
from schedules.generators import birthday_thinning
from schedules.specs import ScheduleSpec
from systems.gibbs import GibbsSystem
from systems.state_space import StateSpace
from utils.logger import setup_logger

logger = setup_logger(__name__)

CLAIM = 'systematic <= 2 alternating; random <= 2 ln n alternating; systematic rounds <= birthday rounds'


def birthday_statistics(system: GibbsSystem, seeds: List[int]) -> Dict[str, float]:
    """Mean number of sites kept by birthday thinning against sqrt(n / max degree)."""
    graph = system.graph
    sizes = np.array([len(birthday_thinning(graph, seed, 0)) for seed in seeds], dtype=np.float64)
    reference = math.sqrt(graph.n_sites / max(1, graph.max_degree))
    return {'seeds': len(seeds), 'mean_kept': float(sizes.mean()), 'sqrt_n_over_degree': reference,
            'ratio': float(sizes.mean()) / reference}


def _tau(space: StateSpace, spec: ScheduleSpec, epsilon: float, start: str,
         cap: Optional[int]) -> MixingTimeResult:
    return mixing_time_exact(space, spec, epsilon, start=start, cap=cap)


def compare_system(label: str, system: GibbsSystem, config: ExperimentConfig) -> Dict[str, Any]:
    tolerance = config.tolerance('inequality')
    space, monotone = monotone_space(label, system, tolerance)
    if not monotone.ok:
        return {'label': label, 'refused': 'system not monotone', 'monotonicity': monotone.to_dict()}
    n = system.n_sites
    epsilon = config.epsilon
    cap = config.param('step_cap')
    specs = {'systematic': ScheduleSpec('systematic', name='systematic'),
             'random': ScheduleSpec('random_scan', name='random')}
    if system.graph.is_bipartite:
        specs['alternating'] = ScheduleSpec('alternating', name='alternating')
    else:
        logger.warning(f"{label}: graph is not bipartite, alternating comparisons skipped")
    if config.param('birthday', True):
        specs['birthday'] = ScheduleSpec('birthday', base=ScheduleSpec('systematic'), name='birthday')

    taus: Dict[str, Dict[str, Any]] = {}
    curves: List[pd.DataFrame] = []
    for key, spec in specs.items():
        for start in ('top', 'worst'):
            result = _tau(space, spec, epsilon, start, cap)
            taus.setdefault(key, {})[start] = result.to_dict()
            if start == 'top':
                frame = result.curve_frame(f"{label}/{key}")
                curves.append(frame)

    checks: List[Dict[str, Any]] = []
    top = {key: taus[key]['top']['steps'] for key in taus}
    if 'alternating' in top:
        a, s, r = top['alternating'], top['systematic'], top['random']
        if None in (a, s, r):
            checks.append({'check': 'alternating comparisons', 'status': 'capped'})
        else:
            checks.append({'check': 'systematic <= 2 alternating', 'lhs': s, 'rhs': 2 * a,
                           'status': 'holds' if s <= 2 * a else 'violated'})
            ln_bound = 2.0 * math.log(n) * a
            checks.append({'check': 'random <= 2 ln(n) alternating', 'lhs': r, 'rhs': ln_bound,
                           'status': 'holds' if r <= ln_bound + tolerance else 'violated',
                           'ratio': r / a, 'bound_log2': 2.0 * math.log2(n) * a})
    if 'birthday' in top:
        s, b = top['systematic'], top['birthday']
        if None in (s, b):
            checks.append({'check': 'systematic rounds <= birthday rounds', 'status': 'capped'})
        else:
            rounds = math.ceil(s / n)
            checks.append({'check': 'systematic rounds <= birthday rounds', 'lhs': rounds, 'rhs': b,
                           'status': 'holds' if rounds <= b else 'violated'})
        if top['random']:
            checks.append({'check': 'systematic / random (informational)', 'ratio': s / top['random'] if s else None,
                           'sqrt_degree_n': math.sqrt(max(1, system.graph.max_degree) * n),
                           'status': 'reported'})

    return {
        'label': label,
        'system': system.describe(),
        'n_sites': n,
        'epsilon': epsilon,
        'tau': taus,
        'checks': checks,
        'birthday': birthday_statistics(system, config.seeds),
        'curves': pd.concat(curves, ignore_index=True) if curves else None,
    }


def cmd_compare_schedules(config: ExperimentConfig, writer: ReportWriter) -> int:
    began = time.perf_counter()
    systems = config.build_systems()
    results = fan_out(compare_system, [(label, system, config) for label, system in systems],
                      config.param('n_jobs'))

    refused = [r['label'] for r in results if r.get('refused')]
    frames = []
    violated = []
    for result in results:
        curves = result.pop('curves', None)
        if curves is not None:
            frames.append(curves)
        writer.json(f"case-{writer.slug(result['label'])}", result)
        for check in result.get('checks', []):
            if check['status'] == 'violated':
                violated.append({'system': result['label'], **check})
                logger.error(f"{result['label']}: {check['check']} violated ({check['lhs']} > {check['rhs']})")
    if frames:
        writer.csv('tv_curves', pd.concat(frames, ignore_index=True))

    rows = []
    for result in results:
        for key, by_start in result.get('tau', {}).items():
            rows.append({'system': result['label'], 'schedule': key, 'tau_top': by_start['top']['steps'],
                         'tau_worst': by_start['worst']['steps'], 'unit': by_start['top']['unit']})
    if rows:
        writer.csv('tau', pd.DataFrame(rows, columns=['system', 'schedule', 'tau_top', 'tau_worst', 'unit']))

    if refused:
        verdict, code = 'refused', EXIT_CONFIG
    elif violated:
        verdict, code = 'violated', EXIT_VIOLATION
    else:
        verdict, code = 'certified', EXIT_OK
    writer.json('report', report(CLAIM, verdict, witness=violated or None, tolerance=config.tolerance('inequality'),
                                 seed=config.seeds[0], wall_time=writer.timing(time.perf_counter() - began),
                                 systems=[r['label'] for r in results], epsilon=config.epsilon))
    return code
