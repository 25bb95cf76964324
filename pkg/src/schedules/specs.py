"""
Seeded schedule specifications.

A ScheduleSpec describes a (possibly random) schedule. realize() draws
one schedule from it; scenarios() enumerates its full distribution when
that distribution is finite and small enough.
"""

from collections import OrderedDict
from dataclasses import dataclass
from itertools import product
from typing import Any, Dict, List, Optional, Tuple
import sys
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))
from schedules.censoring import censor
from schedules.generators import (
    all_offsets,
    alternating_parity_phases,
    alternating_schedule,
    birthday_schedule,
    birthday_thinning,
    global_block_schedule,
    random_schedule,
    systematic_schedule,
)
from schedules.schedule import Schedule
from systems.gibbs import SiteGraph
from utils.config import setting
from utils.exceptions import BudgetExceededError, ScheduleError
from utils.rng import make_rng

KINDS = ('random_scan', 'systematic', 'alternating', 'global_block', 'censored', 'birthday', 'parity_phases')

Scenario = Tuple[float, Schedule]


@dataclass
class ScheduleSpec:
    """
    Args:
        kind: one of KINDS
        length: number of draws for random_scan and parity_phases
        rounds: passes for systematic, alternating, global_block and birthday
        seed: default seed for realize()
        permutation: systematic order (identity when omitted)
        ell, torus: block side and (d, N) for global_block
        offset: fixed global-block offset; random per round when omitted
        base: underlying spec for censored and birthday
        mask: explicit keep mask for censored
        keep_fraction: independent keep probability for censored
    """

    kind: str
    length: int = 0
    rounds: int = 1
    seed: Optional[int] = None
    permutation: Optional[List[int]] = None
    ell: Optional[int] = None
    torus: Optional[Tuple[int, int]] = None
    offset: Optional[List[int]] = None
    base: Optional['ScheduleSpec'] = None
    mask: Optional[List[bool]] = None
    keep_fraction: Optional[float] = None
    name: str = ''

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScheduleError(f"unknown schedule kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == 'censored' and self.base is None:
            raise ScheduleError("censored schedule needs a base")
        if self.kind == 'global_block' and (self.ell is None or self.torus is None):
            raise ScheduleError("global_block schedule needs ell and torus (d, N)")
        if self.keep_fraction is not None and not 0.0 <= self.keep_fraction <= 1.0:
            raise ScheduleError(f"keep_fraction must be in [0, 1], got {self.keep_fraction}")
        if self.length < 0 or self.rounds < 0:
            raise ScheduleError("length and rounds must be nonnegative")

    # ----- serialization -----

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ScheduleSpec':
        data = dict(data)
        if data.get('base') is not None:
            data['base'] = cls.from_dict(data['base'])
        if data.get('torus') is not None:
            data['torus'] = tuple(int(x) for x in data['torus'])
        unknown = sorted(set(data) - set(cls.__dataclass_fields__))
        if unknown:
            raise ScheduleError(f"unknown schedule fields {unknown}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {'kind': self.kind}
        for key in ('length', 'rounds', 'seed', 'permutation', 'ell', 'offset', 'mask', 'keep_fraction', 'name'):
            value = getattr(self, key)
            if value not in (None, '', []) and not (key == 'rounds' and value == 1) and not (key == 'length' and value == 0):
                out[key] = value
        if self.torus is not None:
            out['torus'] = list(self.torus)
        if self.base is not None:
            out['base'] = self.base.to_dict()
        return out

    @property
    def label(self) -> str:
        return self.name or self.kind

    # ----- properties -----

    @property
    def is_random(self) -> bool:
        if self.kind in ('random_scan', 'parity_phases', 'birthday'):
            return True
        if self.kind == 'global_block':
            return self.offset is None
        if self.kind == 'censored':
            return self.keep_fraction is not None or self.base.is_random
        return False

    def period(self, graph: SiteGraph) -> Optional[int]:
        """Round length of periodic deterministic scans."""
        if self.kind == 'systematic':
            return len(self.permutation) if self.permutation is not None else graph.n_sites
        if self.kind == 'alternating':
            return graph.n_sites
        return None

    # ----- realization -----

    def realize(self, graph: SiteGraph, seed: Optional[int] = None) -> Schedule:
        """Draw one schedule from the (seed, purpose) streams."""
        seed = int(seed if seed is not None else (self.seed or 0))
        n = graph.n_sites

        if self.kind == 'random_scan':
            return random_schedule(n, self.length, seed)
        if self.kind == 'systematic':
            return systematic_schedule(self.permutation or list(range(n)), self.rounds)
        if self.kind == 'alternating':
            return alternating_schedule(graph.bipartition, self.rounds)
        if self.kind == 'global_block':
            d, N = self.torus
            steps = []
            for r in range(self.rounds):
                offset = self.offset
                if offset is None:
                    offset = make_rng(seed, 'offset', r).integers(0, self.ell + 1, size=d).tolist()
                steps.extend(global_block_schedule(d, N, self.ell, offset).steps)
            return Schedule(tuple(steps), provenance=f"global_block(rounds={self.rounds})", seed=seed)
        if self.kind == 'censored':
            base = self.base.realize(graph, seed)
            return censor(base, self._mask_for(base, seed))
        if self.kind == 'birthday':
            base = self._birthday_base(graph, seed)
            steps = []
            kept_sizes = []
            for r in range(self.rounds):
                kept = birthday_thinning(graph, seed, r)
                kept_sizes.append(len(kept))
                steps.extend(birthday_schedule(base, kept).steps)
            return Schedule(tuple(steps), provenance=f"birthday(rounds={self.rounds})", seed=seed,
                            metadata={'kept_sizes': kept_sizes})
        stream = random_schedule(n, self.length, seed).steps
        phases = alternating_parity_phases(stream, graph.bipartition)
        return Schedule(phases.steps, provenance=phases.provenance, seed=seed, metadata=phases.metadata)

    def _mask_for(self, base: Schedule, seed: int) -> List[bool]:
        if self.mask is not None:
            if len(self.mask) != len(base):
                raise ScheduleError(f"mask length {len(self.mask)} does not match base length {len(base)}")
            return list(self.mask)
        if self.keep_fraction is not None:
            return (make_rng(seed, 'mask').random(len(base)) < self.keep_fraction).tolist()
        return [True] * len(base)

    def _birthday_base(self, graph: SiteGraph, seed: int) -> Schedule:
        base_spec = self.base or ScheduleSpec('systematic')
        if base_spec.is_random:
            raise ScheduleError("birthday thinning needs a deterministic base round")
        return base_spec.realize(graph, seed)

    # ----- exact enumeration -----

    def scenarios(self, graph: SiteGraph, budget: Optional[int] = None) -> List[Scenario]:
        """
        Every schedule the spec can produce with its probability; identical
        schedules are merged. Order is deterministic.
        """
        if budget is None:
            budget = int(setting('enumeration.max_scenarios', 65536))
        merged: 'OrderedDict[Tuple, Scenario]' = OrderedDict()
        for prob, schedule in self._raw_scenarios(graph, budget):
            if prob <= 0.0:
                continue
            key = schedule.steps
            if key in merged:
                merged[key] = (merged[key][0] + prob, merged[key][1])
            else:
                merged[key] = (prob, schedule)
        return list(merged.values())

    def _raw_scenarios(self, graph: SiteGraph, budget: int) -> List[Scenario]:
        n = graph.n_sites
        if not self.is_random and self.kind != 'censored':
            return [(1.0, self.realize(graph))]

        if self.kind in ('random_scan', 'parity_phases'):
            count = n ** self.length
            _check(count, budget, self.kind)
            prob = float(n) ** -self.length
            out = []
            for stream in product(range(n), repeat=self.length):
                if self.kind == 'random_scan':
                    out.append((prob, Schedule(stream, provenance='random_scan')))
                else:
                    phases = alternating_parity_phases(stream, graph.bipartition)
                    out.append((prob, Schedule(phases.steps, provenance='parity_phases')))
            return out

        if self.kind == 'global_block':
            d, N = self.torus
            offsets = all_offsets(d, self.ell)
            count = len(offsets) ** self.rounds
            _check(count, budget, self.kind)
            prob = 1.0 / count
            out = []
            for choice in product(offsets, repeat=self.rounds):
                steps = []
                for offset in choice:
                    steps.extend(global_block_schedule(d, N, self.ell, offset).steps)
                out.append((prob, Schedule(tuple(steps), provenance='global_block')))
            return out

        if self.kind == 'censored':
            out = []
            for prob, base in self.base.scenarios(graph, budget):
                if self.keep_fraction is None:
                    out.append((prob, censor(base, self._mask_for(base, 0))))
                    continue
                q = self.keep_fraction
                _check(len(out) + 2 ** len(base), budget, 'censored')
                for mask in product((False, True), repeat=len(base)):
                    k = sum(mask)
                    out.append((prob * q ** k * (1.0 - q) ** (len(base) - k), censor(base, mask)))
            return out

        # birthday: exact law of the kept set, independently per round
        base = self._birthday_base(graph, 0)
        per_round = _birthday_outcomes(graph)
        count = len(per_round) ** self.rounds
        _check(count, budget, 'birthday')
        out = []
        for choice in product(per_round, repeat=self.rounds):
            prob = float(np.prod([p for p, _ in choice]))
            steps = []
            for _, kept in choice:
                steps.extend(birthday_schedule(base, kept).steps)
            out.append((prob, Schedule(tuple(steps), provenance='birthday')))
        return out


def _check(count: int, budget: int, what: str) -> None:
    if count > budget:
        raise BudgetExceededError(f"{what} scenario enumeration", count, budget)


def _birthday_outcomes(graph: SiteGraph) -> List[Tuple[float, Tuple[int, ...]]]:
    """Distribution of the kept set produced by birthday_thinning."""
    n = graph.n_sites
    law: Dict[Tuple[int, ...], float] = {}

    def grow(kept: frozenset, blocked: frozenset, prob: float):
        for v in range(n):
            p = prob / n
            if v in blocked:
                key = tuple(sorted(kept))
                law[key] = law.get(key, 0.0) + p
            else:
                grow(kept | {v}, blocked | {v} | set(graph.neighbors[v]), p)

    grow(frozenset(), frozenset(), 1.0)
    return [(p, kept) for kept, p in sorted(law.items())]


def spec_from_cli(kind: str, n_steps: int = 0, rounds: int = 1, seed: Optional[int] = None, **extra) -> ScheduleSpec:
    """Map the --schedule flag values (with dashes) onto a spec."""
    kind = kind.replace('-', '_')
    if kind == 'random':
        kind = 'random_scan'
    return ScheduleSpec(kind=kind, length=n_steps, rounds=rounds, seed=seed, **extra)
