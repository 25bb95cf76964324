"""
contraction: the block-dynamics route to O(n log n) single-site mixing on a torus.

Pipeline:
  1. discrepancy influences of all anchored cubes and the contraction condition;
  2. approximate block updates by t single-site updates (delta, t, binomial tail);
  3. global block updates with a random offset;
  4. K censored approximate global updates (T single-site draws each) against
     the same number of uncensored random-scan updates, exactly.
"""

import math
import time
from pathlib import Path
from typing import Any, Dict
import sys

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))
from experiments.common import EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, monotone_space
from experiments.config import ExperimentConfig
from experiments.reports import ReportWriter, report
from models.graphs import torus_blocks
from transport.contraction import (
    approximate_block_contraction,
    approximation_trend,
    brute_force_influence,
    censored_vs_uncensored,
    contraction_check,
    global_block_contraction,
    path_coupling_check,
)
from utils.config import setting
from utils.exceptions import BudgetExceededError, ConfigError
from utils.logger import setup_logger

logger = setup_logger(__name__)

CLAIM = 'block contraction plus fast block approximation gives O(n log n) single-site mixing'


def _torus_shape(config: ExperimentConfig) -> Dict[str, int]:
    if len(config.models) != 1:
        raise ConfigError("contraction needs exactly one model")
    spec = config.models[0]
    if spec.family == 'torus':
        d, N = int(spec.graph_params['d']), int(spec.graph_params['N'])
    elif spec.family == 'cycle':
        d, N = 1, int(spec.graph_params['n'])
    else:
        raise ConfigError(f"contraction runs on a torus or cycle, got {spec.family}")
    ell = int(config.param('ell', 2))
    if N % (ell + 1):
        raise ConfigError(f"global block updates need (ell+1) | N, got ell={ell}, N={N}")
    return {'d': d, 'N': N, 'ell': ell}


def cmd_contraction(config: ExperimentConfig, writer: ReportWriter) -> int:
    began = time.perf_counter()
    shape = _torus_shape(config)
    d, N, ell = shape['d'], shape['N'], shape['ell']
    label, system = config.build_systems()[0]
    tolerance = config.tolerance('inequality')
    space, monotone = monotone_space(label, system, tolerance)
    if not monotone.ok:
        writer.json('report', report(CLAIM, 'refused', witness=monotone.to_dict(), tolerance=tolerance))
        return EXIT_CONFIG

    gamma_target = float(config.param('gamma_target', 0.05))
    blocks = torus_blocks(d, N, ell)
    contraction = contraction_check(space, blocks, gamma_target, block_labels=list(range(len(blocks))),
                                    n_jobs=int(config.param('n_jobs', 1)))
    writer.csv('phi', contraction.to_frame())
    summary: Dict[str, Any] = {'shape': shape, 'system': system.describe(), 'contraction': contraction.to_dict()}

    if config.param('brute_force', True):
        worst = 0.0
        for (u, anchor), phi in contraction.per_pair.items():
            if u in system.graph.boundary(blocks[anchor]):
                worst = max(worst, abs(brute_force_influence(space, u, blocks[anchor]).rho - phi))
        summary['brute_force_max_diff'] = worst
        if worst > tolerance:
            logger.error(f"influence table disagrees with full enumeration by {worst:.3g}")
            writer.json('report', report(CLAIM, 'violated', witness={'brute_force_max_diff': worst},
                                         tolerance=tolerance, **summary))
            return EXIT_VIOLATION

    if not contraction.satisfied:
        logger.error(f"{label}: contraction fails (gamma={contraction.gamma:.4g} <= {gamma_target}); "
                     f"violating sites {contraction.violating_sites}")
        writer.json('report', report(CLAIM, 'contraction fails',
                                     witness={'violating_sites': contraction.violating_sites,
                                              'gamma': contraction.gamma, 'gamma_target': gamma_target},
                                     tolerance=tolerance, wall_time=writer.timing(time.perf_counter() - began),
                                     **summary))
        return EXIT_VIOLATION

    gamma = contraction.gamma
    path = path_coupling_check(space, blocks, gamma, seed=config.seeds[0], tolerance=tolerance)
    excess = max(contraction.excess_sum(u) for u in range(space.n_sites))
    approx = approximate_block_contraction(space, blocks[0], gamma, d=d, ell=ell, excess_sum=excess,
                                           t_single=config.param('t_single'), rule=config.param('delta_rule'),
                                           tolerance=tolerance)
    contraction.delta, contraction.t_single, contraction.tail_probability = approx.delta, approx.t_single, approx.tail_exact
    exponents = config.param('trend_exponents', setting('contraction.trend_exponents', [4, 5, 6, 7, 8, 9, 10]))
    trend = approximation_trend(space, blocks[0], [2 ** k for k in exponents])
    global_report = global_block_contraction(space, d, N, ell, contraction,
                                             exact=bool(config.param('exact_global', True)), tolerance=tolerance)

    # censored approximate global updates realize the block argument with single-site updates
    n = space.n_sites
    rate = (gamma / 4.0) * (ell / (ell + 1.0)) ** d
    updates = math.ceil(math.log(n / config.epsilon) / rate)
    steps_per_update = approx.trials
    budget = int(config.param('max_pipeline_steps', 200000))
    if updates * steps_per_update > budget:
        raise BudgetExceededError('censored pipeline updates', updates * steps_per_update, budget)
    pipeline = censored_vs_uncensored(space, d, N, ell, steps_per_update, updates)
    pipeline.update({'global_updates': updates, 'steps_per_update': steps_per_update, 'rate': rate,
                     'n_log_n': n * math.log(n), 'steps_over_n_log_n': updates * steps_per_update / (n * math.log(n))})
    pipeline['censoring_holds'] = pipeline['tv_uncensored'] <= pipeline['tv_censored'] + tolerance
    pipeline['uncensored_within_epsilon'] = pipeline['tv_uncensored'] <= config.epsilon

    summary.update({
        'contraction': contraction.to_dict(),
        'path_coupling': vars(path),
        'approximation': approx.to_dict(),
        'trend': {str(t): rho for t, rho in trend.items()},
        'trend_non_increasing': bool(np.all(np.diff(list(trend.values())) <= tolerance)),
        'global_block': global_report.to_dict(),
        'pipeline': pipeline,
    })
    certified = (path.ok and approx.certified and global_report.satisfied
                 and global_report.exact_consistent is not False and pipeline['censoring_holds'])
    log = logger.info if certified else logger.error
    log(f"{label}: gamma={gamma:.4g}, delta={approx.delta:.4g}, t={approx.t_single}, "
        f"{updates} x {steps_per_update} single-site updates, certified={certified}")
    witness = None if certified else {
        'path_coupling': path.ok, 'approximation': approx.certified, 'global_block': global_report.satisfied,
        'global_exact_consistent': global_report.exact_consistent, 'censoring': pipeline['censoring_holds'],
    }
    writer.json('report', report(CLAIM, 'certified' if certified else 'violated', witness=witness,
                                 tolerance=tolerance, seed=config.seeds[0],
                                 wall_time=writer.timing(time.perf_counter() - began), **summary))
    return EXIT_OK if certified else EXIT_VIOLATION
