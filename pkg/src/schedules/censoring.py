"""
Censoring: keeping only a subsequence of a schedule's updates.
"""

from typing import Callable, Iterable, Sequence, Union
import sys
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))
from schedules.schedule import Schedule, Target, target_sites
from utils.exceptions import ScheduleError

Mask = Union[Sequence[bool], np.ndarray, Callable[[Target], bool]]


def censor(schedule: Schedule, keep: Mask) -> Schedule:
    """
    Keep the targets selected by a boolean mask or a predicate, in order.

    Args:
        schedule: Schedule to censor
        keep: mask of len(schedule) booleans, or predicate on targets

    Returns:
        Censored schedule (same seed, provenance tagged)
    """
    if callable(keep):
        mask = [bool(keep(t)) for t in schedule.steps]
    else:
        mask = [bool(x) for x in keep]
        if len(mask) != len(schedule):
            raise ScheduleError(f"mask length {len(mask)} does not match schedule length {len(schedule)}")
    steps = tuple(t for t, k in zip(schedule.steps, mask) if k)
    provenance = schedule.provenance if all(mask) else f"{schedule.provenance}|censored"
    return Schedule(steps, provenance=provenance, seed=schedule.seed, metadata=dict(schedule.metadata))


def censor_to_blocks(schedule: Schedule, union: Iterable[int]) -> Schedule:
    """Drop every target that is not contained in the site union."""
    union = set(int(v) for v in union)
    return censor(schedule, lambda t: all(v in union for v in target_sites(t)))


def compose_masks(first: Sequence[bool], second: Sequence[bool]) -> np.ndarray:
    """
    Mask over the original schedule equivalent to censoring with first,
    then with second (second indexes the survivors of first).
    """
    first = np.asarray(first, dtype=bool)
    second = np.asarray(second, dtype=bool)
    if second.size != int(first.sum()):
        raise ScheduleError(f"second mask has {second.size} entries for {int(first.sum())} survivors")
    combined = first.copy()
    combined[np.flatnonzero(first)] = second
    return combined
