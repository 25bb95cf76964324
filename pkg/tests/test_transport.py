"""
Tests for the Hamming-Kantorovich distance and the block contraction pipeline.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import binom

sys.path.append(str(Path(__file__).parent.parent / 'src'))

from exact.distributions import DistVector, bottom_mass, point_mass, top_mass, tv_distance
from models.graphs import arc_blocks, build_graph
from models.spin_models import build_hardcore_bipartite, build_ising
from systems.state_space import enumerate_states
from transport.contraction import (
    approximate_block_contraction,
    approximation_curve,
    binomial_tail,
    block_anchor,
    brute_force_influence,
    censored_vs_uncensored,
    contraction_check,
    default_t_single,
    delta_for,
    discrepancy_influence,
    global_block_contraction,
    path_coupling_check,
)
from transport.kantorovich import hamming, hamming_matrix, kantorovich, optimal_transport, pattern_hamming_matrix
from utils.exceptions import BudgetExceededError, ModelError
from utils.rng import make_rng


@pytest.fixture(scope='module')
def warm_cycle():
    return enumerate_states(build_ising(build_graph('cycle', n=6), 0.2))


@pytest.fixture(scope='module')
def cold_cycle():
    return enumerate_states(build_ising(build_graph('cycle', n=6), 2.0))


@pytest.fixture(scope='module')
def warm_report(warm_cycle):
    return contraction_check(warm_cycle, arc_blocks(6, 2), gamma_target=0.05)


def test_hamming():
    assert hamming((0, 1, 1), (1, 1, 0)) == 2
    with pytest.raises(ModelError):
        hamming((0, 1), (0, 1, 1))
    assert pattern_hamming_matrix(2, 2).tolist() == [[0, 1, 1, 2], [1, 0, 2, 1], [1, 2, 0, 1], [2, 1, 1, 0]]


def test_point_masses_are_at_hamming_distance():
    space = enumerate_states(build_ising(build_graph('path', n=3), 0.3))
    distances = hamming_matrix(space)
    for i, j in [(0, 7), (1, 2), (3, 3)]:
        rho, plan = kantorovich(point_mass(space, i), point_mass(space, j))
        assert rho == distances[i, j] == hamming(space.states[i], space.states[j])
        assert plan.entries == [(i, j, 1.0)]


METRIC_SYSTEMS = [
    ('ising', 'path', 2, 0.5),
    ('ising', 'path', 3, 0.4),
    ('ising', 'cycle', 4, 0.5),
    ('hardcore', 'cycle', 4, 1.0),
]


@pytest.mark.parametrize('kind,family,n,param', METRIC_SYSTEMS)
def test_kantorovich_bounds_tv_and_is_a_metric(kind, family, n, param):
    graph = build_graph(family, n=n)
    system = build_ising(graph, param) if kind == 'ising' else build_hardcore_bipartite(graph, lam=param)
    space = enumerate_states(system)
    rng = make_rng(0, 'dirichlet', family, n)
    for _ in range(200):
        a, b, c = (DistVector(p, space) for p in rng.dirichlet(np.ones(space.size), size=3))
        rho_ab, plan = kantorovich(a, b)
        assert rho_ab >= tv_distance(a, b) - 1e-9
        assert rho_ab <= kantorovich(a, c)[0] + kantorovich(c, b)[0] + 1e-9
        left, right = plan.marginals(space.size)
        assert np.allclose(left, a.probs, atol=1e-9) and np.allclose(right, b.probs, atol=1e-9)


def test_half_mass_moved_across_two_sites():
    space = enumerate_states(build_ising(build_graph('path', n=2), 0.5))
    half = DistVector(0.5 * (top_mass(space).probs + bottom_mass(space).probs), space)
    rho, _ = kantorovich(top_mass(space), half)
    assert rho == pytest.approx(1.0, abs=1e-12)


def test_transport_budget():
    p = np.full(10, 0.1)
    with pytest.raises(BudgetExceededError):
        optimal_transport(p, p, np.ones((10, 10)), budget=50)


def test_influence_shortcut_matches_brute_force(warm_cycle, cold_cycle):
    for space in (warm_cycle, cold_cycle):
        for u, block in [(0, (1, 2)), (3, (1, 2)), (5, (0, 1)), (1, (1, 2)), (4, (1, 2))]:
            fast = discrepancy_influence(space, u, block)
            slow = brute_force_influence(space, u, block)
            assert fast.rho == pytest.approx(slow.rho, abs=1e-9)


def test_influence_outside_and_inside_the_block(warm_cycle):
    assert discrepancy_influence(warm_cycle, 1, (1, 2)).rho == 0.0
    assert discrepancy_influence(warm_cycle, 4, (1, 2)).rho == 1.0
    assert discrepancy_influence(warm_cycle, 0, (1, 2)).rho > 1.0


def test_warm_cycle_contracts(warm_report):
    assert warm_report.satisfied
    assert warm_report.violating_sites == []
    assert 0.5 < warm_report.gamma < 1.0
    assert warm_report.block_size == 2.0
    frame = warm_report.to_frame()
    assert len(frame) == 36
    assert list(frame.columns) == ['u', 'B_anchor', 'phi', 'witness']


def test_cold_cycle_barely_contracts(cold_cycle):
    loose = contraction_check(cold_cycle, arc_blocks(6, 2))
    strict = contraction_check(cold_cycle, arc_blocks(6, 2), gamma_target=0.05)
    assert 0.0 < loose.gamma < 0.01
    assert loose.satisfied
    assert not strict.satisfied
    assert strict.violating_sites == list(range(6))


def test_path_coupling_from_single_discrepancies(warm_cycle, warm_report):
    report = path_coupling_check(warm_cycle, warm_report.blocks, warm_report.gamma)
    assert report.ok
    assert report.pairs_checked == 2016 - 192
    assert report.worst_ratio <= report.factor + 1e-9


def test_delta_rules_and_t_floor():
    assert delta_for(0.5, 2, 1, 2, 'boundary') == pytest.approx(0.125)
    assert delta_for(0.5, 2, 1, 2, 'ratio') == pytest.approx(1.0 / 6.0)
    with pytest.raises(ModelError):
        delta_for(0.5, 2, 1, 2, 'median')
    assert default_t_single(2, 1, 0.125) == 12


def test_binomial_tail():
    exact, bound, trials = binomial_tail(4, 6, 2, 1)
    assert trials == 24
    assert exact == pytest.approx(binom.cdf(3, 24, 1.0 / 3.0))
    assert bound == pytest.approx(math.exp(-1.0))
    assert exact <= bound


def test_approximation_converges(warm_cycle):
    curve = approximation_curve(warm_cycle, (1, 2), 30)
    assert len(curve) == 31
    assert curve[0] > 0.5
    assert curve[-1] < 1e-3


def test_approximate_block_update_is_certified(warm_cycle, warm_report):
    report = approximate_block_contraction(warm_cycle, (1, 2), warm_report.gamma, d=1, ell=2)
    assert report.certified
    assert report.rho <= report.delta
    assert report.t_single >= default_t_single(2, 1, report.delta)
    assert report.t_min is not None and report.t_min <= report.t_single
    assert report.tail_exact <= report.delta / 2
    with pytest.raises(ModelError):
        approximate_block_contraction(warm_cycle, (1, 2), 0.0)


def test_global_block_update(warm_cycle, warm_report):
    report = global_block_contraction(warm_cycle, 1, 6, 2, warm_report)
    assert report.offsets == 3
    assert report.coverage == pytest.approx([2.0 / 3.0] * 6)
    assert report.satisfied
    assert report.exact_consistent
    assert block_anchor(1, 6, 2, (0, 5)) == 5


def test_censored_global_updates_are_not_closer(warm_cycle):
    result = censored_vs_uncensored(warm_cycle, 1, 6, 2, steps_per_update=3, updates=2)
    assert result['total_steps'] == 6
    assert result['tv_uncensored'] <= result['tv_censored'] + 1e-9
