"""
mc: Monte Carlo runs of the grand coupling at sizes beyond exact enumeration.

Modes (params.modes, default ["coalescence"]):
  coalescence  coupled top/bottom chains per seed, trajectory CSV
  censoring    paired-seed full vs censored runs, increasing statistic
  scaling      coalescence-time table over params.sizes
  order        long coupled run checking top >= bottom after every update
  marginal     chi-square of the simulated top-chain law against exact propagation
"""

import math
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional
import sys

import numpy as np
import pandas as pd

sys.path.append(str(Path(__file__).parent.parent))
from experiments.common import EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, monotone_space
from experiments.config import ExperimentConfig
from experiments.reports import ReportWriter, report
from models.spin_models import ModelSpec, build_system
from montecarlo.coupling import order_preservation_run, site_order
from montecarlo.experiments import (
    empirical_censoring_comparison,
    estimate_mixing_scaling,
    marginal_check,
    run_coupled_batches,
)
from schedules.specs import ScheduleSpec, spec_from_cli
from systems.gibbs import GibbsSystem
from utils.config import setting
from utils.exceptions import ConfigError
from utils.logger import setup_logger

logger = setup_logger(__name__)

MODES = ('coalescence', 'censoring', 'scaling', 'order', 'marginal')
CLAIM = 'monotone grand coupling: coalescence, censoring and scaling at scale'


def resized(spec: ModelSpec, size: int) -> ModelSpec:
    """The same model on the family member of the given size (torus side N, tree depth, or n)."""
    params = dict(spec.graph_params)
    if spec.family == 'torus':
        params['N'] = int(size)
    elif spec.family == 'tree':
        params['depth'] = int(size)
    elif spec.family in ('path', 'cycle', 'complete', 'edgeless'):
        params['n'] = int(size)
    else:
        raise ConfigError(f"{spec.family} graphs have no size parameter")
    return replace(spec, graph_params=params)


def apply_overrides(config: ExperimentConfig, size: Optional[int] = None, beta: Optional[float] = None,
                    schedule: Optional[str] = None, seeds: Optional[int] = None,
                    max_steps: Optional[int] = None) -> ExperimentConfig:
    """--size, --beta, --schedule, --seeds and --max-steps of the mc command."""
    if (size is not None or beta is not None) and not config.models:
        raise ConfigError("--size and --beta need a model in the config")
    if size is not None:
        config.models[0] = resized(config.models[0], size)
    if beta is not None:
        if config.models[0].kind != 'ising':
            raise ConfigError("--beta applies to Ising models only")
        config.models[0] = replace(config.models[0], beta=float(beta))
    if schedule is not None:
        config.schedules = [spec_from_cli(schedule)]
    if seeds is not None:
        if seeds < 1:
            raise ConfigError(f"--seeds must be positive, got {seeds}")
        config.seeds = list(range(config.seeds[0], config.seeds[0] + int(seeds)))
    if max_steps is not None:
        config.params['max_steps'] = int(max_steps)
    return config


def _plan(config: ExperimentConfig) -> ScheduleSpec:
    return config.schedules[0] if config.schedules else ScheduleSpec('random_scan')


def _monotone_gate(config: ExperimentConfig, label: str, system: GibbsSystem) -> Optional[str]:
    if not system.is_two_spin:
        return 'the Monte Carlo engine runs two-spin systems only'
    for spec in config.models:
        if spec.label() == label:
            if spec.kind == 'ising' and spec.beta < 0:
                return 'system not monotone (antiferromagnetic coupling)'
            if spec.kind == 'hardcore' and not spec.monotone:
                return 'system not monotone (hard-core order without flips)'
            return None
    _, monotone = monotone_space(label, system, config.tolerance('inequality'))
    return None if monotone.ok else 'system not monotone'


def _coalescence(system: GibbsSystem, config: ExperimentConfig, writer: ReportWriter) -> Dict[str, Any]:
    plan = _plan(config)
    n = system.n_sites
    max_steps = int(config.param('max_steps', 100 * n * max(1, math.ceil(math.log(n)))))
    checkpoints = int(config.param('checkpoints', setting('montecarlo.checkpoints', 16)))
    trajectories = run_coupled_batches(system, plan, config.seeds, max_steps, checkpoints,
                                       n_jobs=config.param('n_jobs'))
    frame = pd.concat([t.to_frame() for t in trajectories], ignore_index=True)
    writer.csv('trajectories', frame)
    times = np.array([t.coalescence_step for t in trajectories if t.coalesced], dtype=np.float64)
    summary: Dict[str, Any] = {
        'schedule': plan.to_dict(),
        'max_steps': max_steps,
        'seeds': len(trajectories),
        'uncoalesced': sum(not t.coalesced for t in trajectories),
        'mean_steps': float(times.mean()) if times.size else None,
        'median_steps': float(np.median(times)) if times.size else None,
        'trajectories': [t.to_dict() for t in trajectories],
    }
    verdict = 'reported'
    if site_order(plan, system) is None:
        coupon = n * float(np.sum(1.0 / np.arange(1, n + 1)))
        summary['coupon_collector_mean'] = coupon
        if times.size:
            summary['mean_over_coupon_collector'] = float(times.mean()) / coupon
        # without interactions the coupled chains meet exactly when every site has been drawn
        if times.size and _non_interacting(system):
            band = float(config.param('coupon_band', setting('montecarlo.coupon_band', 0.05)))
            deviation = abs(summary['mean_over_coupon_collector'] - 1.0)
            summary['coupon_band'] = band
            verdict = 'consistent' if deviation <= band and not summary['uncoalesced'] else 'violated'
            if verdict == 'violated':
                logger.error(f"mean coalescence {times.mean():.2f} is {deviation:.1%} off n H_n = {coupon:.2f}")
    if summary['uncoalesced']:
        logger.warning(f"{summary['uncoalesced']} seeds did not coalesce within {max_steps} steps")
    return {'verdict': verdict, **summary}


def _non_interacting(system: GibbsSystem) -> bool:
    beta = system.params.get('beta')
    return beta is not None and float(beta) == 0.0 and not system.extra_factors


def _censoring(system: GibbsSystem, config: ExperimentConfig, writer: ReportWriter) -> Dict[str, Any]:
    steps = int(config.param('steps', int(config.param('steps_per_site', 4)) * system.n_sites))
    mask = config.param('mask', config.param('keep_fraction', 0.5))
    comparison = empirical_censoring_comparison(
        system, _plan(config), mask, config.seeds, steps,
        statistic=config.param('statistic', 'magnetization'),
        sigma=config.param('sigma'), n_jobs=config.param('n_jobs'),
    )
    return {'verdict': 'violated' if comparison.violation else 'consistent', **comparison.to_dict()}


def _scaling(spec: ModelSpec, config: ExperimentConfig, writer: ReportWriter) -> Dict[str, Any]:
    sizes = config.param('sizes')
    if not sizes:
        raise ConfigError("scaling mode needs params.sizes")
    factor = config.param('max_steps_factor')
    table = estimate_mixing_scaling(
        lambda size: build_system(resized(spec, size)), sizes, _plan(config), config.seeds,
        epsilon=config.epsilon,
        max_steps=(lambda n: int(float(factor) * n * max(1.0, math.log(n)))) if factor else None,
        normalization=config.param('normalization'), band=config.param('band'), n_jobs=config.param('n_jobs'),
    )
    writer.csv('scaling', table.frame)
    return {'verdict': 'reported', **table.to_dict()}


def _order(system: GibbsSystem, config: ExperimentConfig, writer: ReportWriter) -> Dict[str, Any]:
    steps = int(config.param('order_steps', 100000))
    replicas = int(config.param('order_replicas', 1))
    checked = order_preservation_run(system, steps, config.seeds[0], replicas, _plan(config))
    return {'verdict': 'certified', 'coupled_updates': checked, 'replicas': replicas}


def _marginal(system: GibbsSystem, config: ExperimentConfig, writer: ReportWriter) -> Dict[str, Any]:
    space, _ = monotone_space(system.describe(), system, config.tolerance('inequality'))
    sites = config.param('marginal_sites')
    if sites is None:
        sites = list(range(system.n_sites)) * int(config.param('marginal_rounds', 1))
    check = marginal_check(system, space, sites, int(config.param('replicas', 100000)), config.seeds[0],
                           alpha=float(config.param('alpha', 1e-3)))
    return {'verdict': 'certified' if check.passed else 'violated', 'sites': list(sites), **check.to_dict()}


def cmd_mc(config: ExperimentConfig, writer: ReportWriter) -> int:
    began = time.perf_counter()
    modes: List[str] = list(config.param('modes', [config.param('mode', 'coalescence')]))
    unknown = sorted(set(modes) - set(MODES))
    if unknown:
        raise ConfigError(f"unknown mc modes {unknown}; expected some of {MODES}")
    label, system = config.build_systems()[0]
    refusal = _monotone_gate(config, label, system)
    if refusal:
        logger.error(f"{label}: {refusal}")
        writer.json('report', report(CLAIM, 'refused', witness={'system': label, 'reason': refusal}))
        return EXIT_CONFIG

    results: Dict[str, Any] = {}
    for mode in modes:
        logger.info(f"{label}: mc {mode} over {len(config.seeds)} seeds")
        if mode == 'scaling':
            if not config.models:
                raise ConfigError("scaling mode needs a model spec, not a system file")
            results[mode] = _scaling(config.models[0], config, writer)
        else:
            runner = {'coalescence': _coalescence, 'censoring': _censoring,
                      'order': _order, 'marginal': _marginal}[mode]
            results[mode] = runner(system, config, writer)

    violated = {mode: r for mode, r in results.items() if r['verdict'] == 'violated'}
    verdict = 'violated' if violated else 'consistent'
    writer.json('report', report(CLAIM, verdict, witness=sorted(violated) or None,
                                 tolerance=config.tolerance('inequality'), seed=config.seeds[0],
                                 wall_time=writer.timing(time.perf_counter() - began),
                                 system=label, modes=results))
    return EXIT_VIOLATION if violated else EXIT_OK
