"""
Exact mixing times tau(eps): the least t with TV(p^t(start, .), pi) <= eps.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union
import sys
from pathlib import Path

import numpy as np
import pandas as pd

sys.path.append(str(Path(__file__).parent.parent))
from exact.distributions import apply_target_rows, averaged_rows, scenario_rows, tv_rows
from schedules.specs import ScheduleSpec
from systems.state_space import StateSpace
from utils.config import setting
from utils.exceptions import ConfigError, ModelError, ScheduleError
from utils.logger import setup_logger

logger = setup_logger(__name__)

Start = Union[str, int]


@dataclass
class MixingTimeResult:
    steps: Optional[int]
    epsilon: float
    start: str
    schedule: str
    capped: bool = False
    unit: str = 'updates'
    granularity: int = 1
    worst_state: Optional[int] = None
    curve: List[Tuple[int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'steps': self.steps,
            'epsilon': self.epsilon,
            'start': self.start,
            'schedule': self.schedule,
            'capped': self.capped,
            'unit': self.unit,
            'granularity': self.granularity,
            'worst_state': self.worst_state,
        }

    def curve_frame(self, schedule_id: Optional[str] = None) -> pd.DataFrame:
        sid = schedule_id or self.schedule
        return pd.DataFrame([{'step': s, 'tv': tv, 'schedule_id': sid} for s, tv in self.curve],
                            columns=['step', 'tv', 'schedule_id'])


def step_operator(space: StateSpace, spec: ScheduleSpec) -> Tuple[Callable[[np.ndarray, int], np.ndarray], int, str]:
    """
    Per-step kernel of a schedule spec.

    Returns:
        (apply(rows, t) for step t = 0, 1, ..., natural check granularity, unit)
    """
    graph = space.system.graph
    n = space.n_sites

    if spec.kind == 'random_scan':
        singletons = [(v,) for v in range(n)]
        return (lambda rows, t: averaged_rows(space, rows, singletons)), 1, 'updates'

    if spec.kind in ('systematic', 'alternating'):
        pattern = ScheduleSpec(spec.kind, permutation=spec.permutation).realize(graph).steps
        granularity = 1 if spec.kind == 'systematic' else len(pattern)
        return (lambda rows, t: apply_target_rows(space, rows, pattern[t % len(pattern)])), granularity, 'updates'

    if spec.kind == 'global_block':
        one_round = ScheduleSpec('global_block', ell=spec.ell, torus=spec.torus, offset=spec.offset)
        scenarios = one_round.scenarios(graph)
        return (lambda rows, t: scenario_rows(space, rows, scenarios)), 1, 'global updates'

    if spec.kind == 'birthday':
        one_round = ScheduleSpec('birthday', base=spec.base, rounds=1)
        scenarios = one_round.scenarios(graph)
        return (lambda rows, t: scenario_rows(space, rows, scenarios)), 1, 'rounds'

    raise ScheduleError(f"{spec.kind} schedules have no per-step kernel")


def _start_rows(space: StateSpace, start: Start) -> Tuple[np.ndarray, str]:
    if start == 'worst':
        return np.eye(space.size), 'worst'
    if start == 'top':
        index = space.top_index
    elif start == 'bottom':
        index = space.bottom_index
    else:
        index = int(start)
    if index is None:
        raise ModelError(f"{space.system.describe()} has no {start} configuration in Omega")
    rows = np.zeros((1, space.size))
    rows[0, index] = 1.0
    return rows, str(start)


def mixing_time_exact(
    space: StateSpace,
    spec: ScheduleSpec,
    epsilon: Optional[float] = None,
    start: Start = 'top',
    cap: Optional[int] = None,
    check_every: Optional[int] = None,
) -> MixingTimeResult:
    """
    First hitting time of the eps-ball around pi.

    Args:
        space: enumerated state space
        spec: schedule spec with a per-step kernel
        epsilon: TV threshold in (0, 1) (default mixing.epsilon)
        start: 'top', 'bottom', 'worst' (max over all starts) or a state index
        cap: step cap (default mixing.step_cap)
        check_every: test TV only at multiples of this (default: 1, or a
            full round for alternating scans)

    Returns:
        MixingTimeResult with the TV curve at checked steps
    """
    if epsilon is None:
        epsilon = float(setting('mixing.epsilon', 0.25))
    if not 0.0 < epsilon < 1.0:
        raise ConfigError(f"epsilon must be in (0, 1), got {epsilon}")
    if cap is None:
        cap = int(setting('mixing.step_cap', 20000))

    apply, granularity, unit = step_operator(space, spec)
    granularity = check_every or granularity
    rows, start_label = _start_rows(space, start)
    pi = space.pi

    def distance(r):
        tvs = tv_rows(r, pi)
        worst = int(np.argmax(tvs))
        return float(tvs[worst]), worst

    tv, worst = distance(rows)
    curve = [(0, tv)]
    if tv <= epsilon:
        return MixingTimeResult(0, epsilon, start_label, spec.label, unit=unit, granularity=granularity,
                                worst_state=worst if start == 'worst' else None, curve=curve)

    for t in range(cap):
        rows = apply(rows, t)
        step = t + 1
        if step % granularity:
            continue
        tv, worst = distance(rows)
        curve.append((step, tv))
        if tv <= epsilon:
            logger.debug(f"{spec.label}: tau({epsilon}) = {step} {unit} from {start_label}")
            return MixingTimeResult(step, epsilon, start_label, spec.label, unit=unit, granularity=granularity,
                                    worst_state=worst if start == 'worst' else None, curve=curve)

    logger.warning(f"{spec.label}: TV still {tv:.4g} > {epsilon} after cap of {cap} {unit}")
    return MixingTimeResult(None, epsilon, start_label, spec.label, capped=True, unit=unit,
                            granularity=granularity, curve=curve)
