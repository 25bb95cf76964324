"""
Tests for schedules: generators, censoring, seeded specs and operator equality.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent / 'src'))

from models.graphs import build_graph
from models.spin_models import build_ising
from schedules.censoring import censor, censor_to_blocks, compose_masks
from schedules.commute import commute_check, is_nonadjacent_transposition
from schedules.generators import (
    all_offsets,
    alternating_parity_phases,
    alternating_schedule,
    birthday_schedule,
    birthday_thinning,
    global_block_blocks,
    random_schedule,
    systematic_schedule,
)
from schedules.schedule import Schedule, dump_schedule, load_schedule
from schedules.specs import ScheduleSpec, _birthday_outcomes, spec_from_cli
from systems.state_space import enumerate_states
from utils.exceptions import BudgetExceededError, ScheduleError


def test_random_schedule_is_reproducible():
    a = random_schedule(5, 40, seed=3)
    b = random_schedule(5, 40, seed=3)
    c = random_schedule(5, 40, seed=4)
    assert a.steps == b.steps
    assert a.steps != c.steps
    assert all(0 <= v < 5 for v in a)


def test_systematic_and_alternating_rounds():
    assert systematic_schedule([2, 0, 1], rounds=2).steps == (2, 0, 1, 2, 0, 1)
    with pytest.raises(ScheduleError):
        systematic_schedule([0, 0, 1])
    path = build_graph('path', n=4)
    assert alternating_schedule(path.bipartition).steps == (0, 2, 1, 3)
    with pytest.raises(ScheduleError):
        alternating_schedule(build_graph('cycle', n=3).bipartition)


def test_global_block_offsets():
    assert global_block_blocks(1, 6, 2, [0]) == [(0, 1), (3, 4)]
    assert global_block_blocks(1, 6, 2, [1]) == [(1, 2), (4, 5)]
    assert global_block_blocks(1, 6, 2, [2]) == [(2, 3), (0, 5)]
    assert len(global_block_blocks(2, 6, 2, [1, 0])) == 4
    assert len(all_offsets(2, 2)) == 9


def test_global_block_needs_divisibility_and_valid_offset():
    with pytest.raises(ScheduleError):
        global_block_blocks(1, 4, 2, [0])
    with pytest.raises(ScheduleError):
        global_block_blocks(1, 6, 2, [3])


def test_censor_keeps_order():
    schedule = Schedule((3, 1, 4, 1, 5))
    assert censor(schedule, [True, False, True, False, True]).steps == (3, 4, 5)
    assert censor(schedule, lambda t: t != 1).steps == (3, 4, 5)
    with pytest.raises(ScheduleError):
        censor(schedule, [True])


def test_censor_to_blocks_drops_partial_blocks():
    schedule = Schedule((0, (1, 2), (2, 3), 3))
    assert censor_to_blocks(schedule, [0, 1, 2]).steps == (0, (1, 2))


def test_compose_masks():
    combined = compose_masks([True, False, True, True], [False, True, True])
    assert combined.tolist() == [False, False, True, True]
    with pytest.raises(ScheduleError):
        compose_masks([True, False], [True, True])


def test_parity_phases_switch_when_class_covered():
    bipartition = (0, 1, 0)
    phases = alternating_parity_phases((0, 1, 2, 1, 0), bipartition)
    assert phases.steps == (0, 2, 1, 0)
    assert phases.metadata['mask'] == [True, False, True, True, True]
    assert phases.metadata['phase_ends'] == [2, 3]
    assert phases.metadata['kept_draws'] == 4


def test_birthday_thinning_gives_independent_set():
    graph = build_graph('cycle', n=8)
    for seed in range(20):
        kept = birthday_thinning(graph, seed, 0)
        assert kept
        assert len(set(kept)) == len(kept)
        assert not any(graph.is_adjacent(u, v) for u in kept for v in kept)


def test_birthday_schedule_follows_base_order():
    base = systematic_schedule([3, 2, 1, 0])
    assert birthday_schedule(base, [0, 2]).steps == (2, 0)


def test_birthday_outcome_law():
    law = dict((kept, p) for p, kept in _birthday_outcomes(build_graph('edgeless', n=2)))
    assert law == pytest.approx({(0,): 0.25, (1,): 0.25, (0, 1): 0.5})
    path_law = _birthday_outcomes(build_graph('path', n=2))
    assert [kept for _, kept in path_law] == [(0,), (1,)]


def test_schedule_file_round_trip(tmp_path):
    schedule = Schedule((0, (1, 2), 3))
    path = tmp_path / 'schedule.jsonl'
    dump_schedule(schedule, path)
    assert load_schedule(path).steps == schedule.steps
    path.write_text('{"site": 0}\nnot json\n')
    with pytest.raises(ScheduleError):
        load_schedule(path)


def test_spec_scenarios_for_random_scan():
    graph = build_graph('path', n=2)
    scenarios = ScheduleSpec('random_scan', length=2).scenarios(graph)
    assert len(scenarios) == 4
    assert sum(p for p, _ in scenarios) == pytest.approx(1.0)
    with pytest.raises(BudgetExceededError):
        ScheduleSpec('random_scan', length=10).scenarios(graph, budget=100)


def test_spec_scenarios_for_bernoulli_censoring():
    graph = build_graph('path', n=2)
    spec = ScheduleSpec('censored', base=ScheduleSpec('systematic'), keep_fraction=0.5)
    scenarios = spec.scenarios(graph)
    assert sorted(s.steps for _, s in scenarios) == [(), (0,), (0, 1), (1,)]
    assert all(p == pytest.approx(0.25) for p, _ in scenarios)


def test_global_block_spec_realizes_valid_rounds():
    graph = build_graph('cycle', n=6)
    spec = ScheduleSpec('global_block', rounds=3, ell=2, torus=(1, 6))
    schedule = spec.realize(graph, seed=11)
    assert len(schedule) == 6
    assert schedule.steps == spec.realize(graph, seed=11).steps
    assert len(spec.scenarios(graph)) == 27


def test_spec_dict_round_trip_and_errors():
    spec = ScheduleSpec('censored', base=ScheduleSpec('systematic', rounds=2), mask=[True, False])
    assert ScheduleSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ScheduleError):
        ScheduleSpec.from_dict({'kind': 'systematic', 'speed': 2})
    with pytest.raises(ScheduleError):
        ScheduleSpec('zigzag')
    assert spec_from_cli('random', 5).kind == 'random_scan'


def test_commuting_targets():
    space = enumerate_states(build_ising(build_graph('path', n=3), 0.5))
    far = commute_check(space, Schedule((0, 2)), Schedule((2, 0)))
    near = commute_check(space, Schedule((0, 1)), Schedule((1, 0)))
    assert far.equal and far.nonadjacent_transposition
    assert not near.equal and near.nonadjacent_transposition is False
    assert near.max_tv > 1e-6


def test_nonadjacent_transposition_shape():
    graph = build_graph('path', n=4)
    assert is_nonadjacent_transposition(graph, [0, 3, 1], [3, 0, 1])
    assert not is_nonadjacent_transposition(graph, [0, 3, 1], [1, 3, 0])
    assert not is_nonadjacent_transposition(graph, [0, 1], [1, 0])


def test_parity_phase_replay_on_cycle6():
    graph = build_graph('cycle', n=6)
    stream = random_schedule(6, 60, seed=5).steps
    phases = ScheduleSpec('parity_phases', length=60).realize(graph, seed=5)

    # replay: even sites first, a phase ends when its whole class has been drawn
    parity, seen, kept, ends = 0, set(), [], []
    for position, v in enumerate(stream):
        if v % 2 != parity:
            continue
        kept.append(v)
        seen.add(v)
        if seen == {parity, parity + 2, parity + 4}:
            ends.append(position)
            parity, seen = 1 - parity, set()

    assert graph.bipartition == (0, 1, 0, 1, 0, 1)
    assert phases.steps == tuple(kept)
    assert phases.metadata['phase_ends'] == ends
    assert phases.metadata['kept_draws'] == len(kept)
    assert phases.metadata['total_draws'] == 60


def test_birthday_size_on_cycle100():
    # with j sites kept their closed neighbourhoods cover between 2j + 1 and 3j sites,
    # which brackets P(K >= m) between two products
    n = 100
    graph = build_graph('cycle', n=n)
    kept_sets = [birthday_thinning(graph, seed, 0) for seed in range(10000)]
    sizes = np.array([len(kept) for kept in kept_sets])

    def expected_size(covered):
        total, survive = 0.0, 1.0
        for m in range(1, n + 1):
            total += survive
            survive *= max(0.0, 1.0 - covered(m) / n)
        return total

    low = expected_size(lambda j: 3 * j)
    high = expected_size(lambda j: 2 * j + 1)
    assert 0.97 * low <= sizes.mean() <= 1.03 * high
    assert sizes.min() >= 1
    assert all(not graph.is_adjacent(u, v) for kept in kept_sets[:200] for u in kept for v in kept if u != v)
