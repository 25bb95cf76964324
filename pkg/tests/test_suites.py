"""
Tests for the exhaustive censoring and lemma suites.
"""

import sys
from pathlib import Path

import pytest

sys.path.append(str(Path(__file__).parent.parent / 'src'))

from exact.distributions import bottom_mass
from exact.suites import (
    canonical,
    dominance_order_check,
    lemma_suite,
    random_schedule_suite,
    reachable_laws,
    relaxed_start_suite,
    single_omission_suite,
    subsequence_suite,
)
from experiments.common import monotone_space
from models.graphs import build_graph
from models.spin_models import build_hardcore_bipartite, build_ising
from systems.state_space import enumerate_states


@pytest.fixture(scope='module')
def path3():
    return enumerate_states(build_ising(build_graph('path', n=3), 0.4))


@pytest.fixture(scope='module')
def hardcore_c4():
    return enumerate_states(build_hardcore_bipartite(build_graph('cycle', n=4), lam=1.0))


def test_canonical_drops_repeats():
    assert canonical((0, 0, 1, 1, 0)) == (0, 1, 0)
    assert canonical(()) == ()


def test_subsequences_of_path(path3):
    report = subsequence_suite(path3, 3)
    assert report.ok
    assert report.verdict == 'certified'
    # 3 * 1 + 9 * 3 + 27 * 7 subsequence pairs
    assert report.cases == 219
    assert report.details['distinct_laws'] <= 1 + 3 + 9 + 27


def test_single_omission_on_hardcore(hardcore_c4):
    report = single_omission_suite(hardcore_c4, 3)
    assert report.ok
    assert report.cases == 4 * 1 + 16 * 2 + 64 * 3


def test_relaxed_starts(path3):
    report = relaxed_start_suite(path3, 2)
    assert report.ok
    assert len(report.details['starts']) == 5


def test_random_schedules(path3):
    report = random_schedule_suite(path3, 3, keep_fraction=0.5)
    assert report.ok
    assert report.cases == 2


def test_lemmas_hold_on_monotone_systems(path3, hardcore_c4):
    for space in (path3, hardcore_c4):
        report = lemma_suite(space, depth=2)
        assert report.ok, report.violations


def test_bottom_start_is_caught(path3):
    report = subsequence_suite(path3, 1, start=bottom_mass(path3))
    assert not report.ok
    assert report.violation_count == 3
    assert report.violations[0]['dominates'] is False


def test_report_hides_wall_time_by_default(path3):
    report = subsequence_suite(path3, 1)
    assert report.to_dict()['wall_time'] is None
    assert report.to_dict(record_timing=True)['wall_time'] >= 0.0


def test_stochastic_order_is_a_partial_order(path3):
    laws = reachable_laws(path3, 2)
    assert dominance_order_check(laws) == {'reflexive': 0, 'antisymmetric': 0, 'transitive': 0}


def test_antiferromagnet_is_refused_by_the_gate():
    system = build_ising(build_graph('path', n=3), -0.5)
    _, report = monotone_space('antiferro', system)
    assert not report.ok
