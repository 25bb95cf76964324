"""
Update schedules: finite sequences of targets, each a single site or a block.
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union
import sys
from pathlib import Path

sys.path.append(str(Path(__file__).parent.parent))
from systems.gibbs import SiteGraph
from utils.exceptions import ScheduleError

Target = Union[int, Tuple[int, ...]]


def normalize_target(target: Any) -> Target:
    """Sites stay ints; blocks become sorted tuples; one-site blocks stay blocks."""
    if isinstance(target, dict):
        if 'site' in target:
            return int(target['site'])
        if 'block' in target:
            return tuple(sorted(set(int(v) for v in target['block'])))
        raise ScheduleError(f"target needs 'site' or 'block': {target}")
    if isinstance(target, (list, tuple, set, frozenset)):
        return tuple(sorted(set(int(v) for v in target)))
    return int(target)


def target_sites(target: Target) -> Tuple[int, ...]:
    return target if isinstance(target, tuple) else (target,)


@dataclass(frozen=True)
class Schedule:
    """
    Ordered update targets.

    Args:
        steps: targets, each a site index or a sorted tuple of sites
        provenance: free-form tag (generator and parameters)
        seed: seed of the generating stream, if any
        metadata: generator-specific extras (e.g. parity phase boundaries)
    """

    steps: Tuple[Target, ...] = ()
    provenance: str = ''
    seed: Optional[int] = None
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, 'steps', tuple(normalize_target(t) for t in self.steps))

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __getitem__(self, i):
        return self.steps[i]

    def validate(self, graph: SiteGraph) -> 'Schedule':
        for t in self.steps:
            for v in target_sites(t):
                if not 0 <= v < graph.n_sites:
                    raise ScheduleError(f"target {t} references site outside 0..{graph.n_sites - 1}")
        return self

    def sites_touched(self) -> Tuple[int, ...]:
        touched = set()
        for t in self.steps:
            touched.update(target_sites(t))
        return tuple(sorted(touched))

    def then(self, other: 'Schedule') -> 'Schedule':
        return Schedule(self.steps + other.steps, provenance=f"{self.provenance}+{other.provenance}")

    def to_lines(self) -> List[str]:
        lines = []
        for t in self.steps:
            payload = {'block': list(t)} if isinstance(t, tuple) else {'site': t}
            lines.append(json.dumps(payload, sort_keys=True))
        return lines


def dump_schedule(schedule: Schedule, path: Union[str, Path]) -> None:
    """Write one JSON target per line."""
    with open(path, 'w') as f:
        for line in schedule.to_lines():
            f.write(line + '\n')


def load_schedule(path: Union[str, Path], provenance: str = '') -> Schedule:
    """Read a JSON-lines schedule."""
    steps = []
    with open(path, 'r') as f:
        for number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                steps.append(normalize_target(json.loads(line)))
            except json.JSONDecodeError as e:
                raise ScheduleError(f"{path}:{number}: {e}")
    return Schedule(tuple(steps), provenance=provenance or Path(path).stem)
