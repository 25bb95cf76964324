"""
Tests for the Monte Carlo engine: packed states, the grand coupling,
censoring comparisons, scaling tables and goodness of fit.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent / 'src'))

from models.graphs import build_graph
from models.spin_models import ModelSpec, build_hardcore_bipartite, build_ising, build_system
from montecarlo.coupling import (
    TwoSpinDynamics,
    _chunk_size,
    coupled_update,
    order_preservation_run,
    run_chain_batch,
    run_coupled_batch,
    simulate_coalescence,
)
from montecarlo.experiments import empirical_censoring_comparison, estimate_mixing_scaling, marginal_check
from montecarlo.lattice import LatticeState, magnetization
from schedules.specs import ScheduleSpec
from systems.gibbs import GibbsSystem
from systems.state_space import enumerate_states
from utils.exceptions import ModelError, OrderViolationError
from utils.rng import make_rng


def ising(n=3, beta=0.5, family='path'):
    return build_ising(build_graph(family, n=n), beta)


def test_packed_ranks_round_trip():
    ranks = make_rng(0, 'test').integers(0, 2, size=(3, 70)).astype(np.uint8)
    state = LatticeState.from_ranks(ranks)
    assert state.words.shape == (3, 2)
    assert np.array_equal(state.ranks(), ranks)
    zeros = LatticeState.from_ranks(np.zeros_like(ranks))
    assert state.hamming(zeros).tolist() == ranks.sum(axis=1).tolist()
    assert state.dominates(zeros).all()
    assert not zeros.dominates(state).any()


def test_packed_configuration_uses_site_order():
    system = build_hardcore_bipartite(build_graph('cycle', n=4), lam=1.0)
    top = system.top_configuration()
    state = LatticeState.from_configuration(system, top, replicas=2)
    assert state.ranks().tolist() == [[1, 1, 1, 1], [1, 1, 1, 1]]
    assert state.to_configuration(system, 1) == top
    with pytest.raises(ModelError):
        LatticeState.from_ranks(np.array([[0, 2]]))


def test_coupled_update_thresholds():
    # middle site of a path at beta = 0.5: P(+ | ++) = expit(2) and P(+ | --) = expit(-2)
    system = ising(3, 0.5)
    dynamics = TwoSpinDynamics(system)
    top = LatticeState.from_configuration(system, system.top_configuration())
    bottom = LatticeState.from_configuration(system, system.bottom_configuration())
    low, high = 1.0 - 0.8807970779778823, 1.0 - 0.11920292202211755
    for u, expected in [(low - 1e-6, (0, 0)), (0.5, (1, 0)), (high + 1e-6, (1, 1))]:
        new_top, new_bottom = coupled_update(dynamics, top, bottom, 1, u)
        assert (int(new_top.ranks()[0, 1]), int(new_bottom.ranks()[0, 1])) == expected
        assert new_top.dominates(new_bottom).all()


def test_systematic_coalescence_at_infinite_temperature():
    system = ising(6, 0.0, 'cycle')
    trajectory = simulate_coalescence(system, ScheduleSpec('systematic'), seed=5, max_steps=100)
    assert trajectory.coalescence_step == 6
    assert trajectory.records[0]['hamming'] == 6
    assert trajectory.records[-1]['hamming'] == 0


def test_random_scan_coalesces_when_every_site_was_drawn():
    system = ising(5, 0.0, 'path')
    seed = 12
    sites = make_rng(seed, 'sites').integers(0, 5, size=200, dtype=np.int64)
    seen, expected = set(), None
    for step, v in enumerate(sites, start=1):
        seen.add(int(v))
        if len(seen) == 5:
            expected = step
            break
    trajectory = run_coupled_batch(system, ScheduleSpec('random_scan'), [seed], 200)[0]
    assert trajectory.coalescence_step == expected


def test_replica_streams_do_not_depend_on_batch():
    system = ising(8, 0.3, 'cycle')
    alone = run_coupled_batch(system, ScheduleSpec('random_scan'), [4], 500)[0]
    together = run_coupled_batch(system, ScheduleSpec('random_scan'), [1, 4, 9], 500)[1]
    assert alone.coalescence_step == together.coalescence_step


def test_ferromagnet_keeps_order():
    system = ising(8, 0.4, 'cycle')
    assert order_preservation_run(system, 2000, seed=3, replicas=4) == 8000


def test_antiferromagnet_breaks_order():
    system = build_system(ModelSpec('ising', 'path', {'n': 3}, beta=-1.0))
    with pytest.raises(OrderViolationError):
        order_preservation_run(system, 500, seed=0)


def test_fully_censored_chain_stays_at_top():
    system = ising(4, 0.3, 'cycle')
    ranks = run_chain_batch(system, ScheduleSpec('random_scan'), [1, 2], 50, keep=[False] * 50)
    assert ranks.tolist() == [[1, 1, 1, 1], [1, 1, 1, 1]]
    assert magnetization(ranks).tolist() == [1.0, 1.0]


def test_censoring_comparison_is_consistent():
    system = ising(8, 0.3, 'cycle')
    comparison = empirical_censoring_comparison(system, ScheduleSpec('random_scan'), 0.5,
                                                list(range(40)), steps=32)
    assert not comparison.violation
    assert comparison.mean_censored >= comparison.mean_full - 4 * comparison.se_diff
    assert comparison.to_dict()['verdict'] == 'consistent'


def test_scaling_table_for_systematic_scan():
    table = estimate_mixing_scaling(lambda n: ising(n, 0.0, 'cycle'), [8, 16], ScheduleSpec('systematic'),
                                    seeds=[0, 1, 2])
    assert table.normalization == 'n'
    assert table.frame['median_steps'].tolist() == [8.0, 16.0]
    assert table.frame['ratio'].tolist() == [1.0, 1.0]
    assert table.bounded


def test_simulated_law_matches_exact_law():
    system = ising(4, 0.44, 'cycle')
    space = enumerate_states(system)
    check = marginal_check(system, space, [0, 1, 2, 3, 0], replicas=20000, seed=1, alpha=1e-6)
    assert check.impossible_hits == 0
    assert check.passed
    assert check.dof >= 1


def test_two_spin_dynamics_refuses_extra_factors():
    base = ising(3, 0.3)
    system = GibbsSystem(base.graph, base.spins, base.pair_potential, base.site_potential,
                         extra_factors=(((0, 2), np.ones((2, 2))),))
    with pytest.raises(ModelError):
        TwoSpinDynamics(system)


def test_torus_coalescence_replays_and_follows_site_cover():
    system = build_ising(build_graph('torus', d=2, N=16), 0.2)
    n = system.n_sites
    cap = 1024 * 200
    first = run_coupled_batch(system, ScheduleSpec('random_scan'), [7], cap, checkpoints=4)[0]
    again = simulate_coalescence(system, ScheduleSpec('random_scan'), seed=7, max_steps=cap, checkpoints=4)
    assert first.coalesced
    assert again.coalescence_step == first.coalescence_step
    assert again.records == first.records

    # the chains cannot meet before every site has been drawn once
    rng = make_rng(7, 'sites')
    seen, drawn, cover = set(), 0, None
    while cover is None:
        for v in rng.integers(0, n, size=_chunk_size(1), dtype=np.int64):
            drawn += 1
            seen.add(int(v))
            if len(seen) == n:
                cover = drawn
                break
    assert first.coalescence_step >= cover
    last = first.records[-1]
    assert last['step'] == first.coalescence_step
    assert last['hamming'] == 0
    assert last['mag_top'] == last['mag_bottom']


@pytest.mark.slow
def test_torus_coalescence_scales_like_n_log_n():
    table = estimate_mixing_scaling(lambda N: build_ising(build_graph('torus', d=2, N=N), 0.2), [8, 16, 32],
                                    ScheduleSpec('random_scan'), seeds=list(range(8)))
    assert table.normalization == 'n_log_n'
    assert table.frame['n'].tolist() == [64, 256, 1024]
    assert table.frame['uncoalesced'].sum() == 0
    assert table.bounded
    assert ((table.frame['ratio_n_log_n'] >= 0.8) & (table.frame['ratio_n_log_n'] <= 8.0)).all()
