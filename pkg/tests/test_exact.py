"""
Tests for exact propagation, likelihood ratios, mixing times and dominance.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent / 'src'))

from exact.distributions import (
    DistVector,
    apply_schedule,
    bottom_mass,
    evaluate_spec,
    likelihood_ratio_increasing,
    marginal,
    monotone_extension,
    normalized,
    point_mass,
    random_scan_kernel,
    top_mass,
    tv_curve,
    tv_distance,
    tv_to_stationary,
    update,
    weakly_increasing_start,
)
from exact.dominance import coupling_marginals, stochastic_dominance
from exact.mixing import mixing_time_exact
from models.graphs import build_graph
from models.spin_models import build_hardcore_bipartite, build_ising
from schedules.generators import alternating_order
from schedules.specs import ScheduleSpec
from systems.state_space import conditional_spin_distribution, enumerate_states
from utils.exceptions import ConfigError, ModelError, SpaceMismatchError


def ising_space(n=3, beta=0.4, family='path'):
    return enumerate_states(build_ising(build_graph(family, n=n), beta))


def test_dist_vector_validates():
    space = ising_space()
    with pytest.raises(ModelError):
        DistVector(np.full(space.size, 0.5), space)
    with pytest.raises(SpaceMismatchError):
        DistVector(np.ones(3) / 3, space)
    with pytest.raises(SpaceMismatchError):
        tv_distance(top_mass(space), top_mass(ising_space()))


def test_single_update_matches_conditional_law():
    space = ising_space(beta=0.5)
    system = space.system
    after = update(top_mass(space), 1)
    law = conditional_spin_distribution(system, system.top_configuration(), 1)
    flipped = system.top_configuration().with_spin(1, 0)
    assert after[space.top_index] == pytest.approx(law[1], abs=1e-14)
    assert after[space.index_of(flipped)] == pytest.approx(law[0], abs=1e-14)


def test_pi_is_invariant():
    space = ising_space(4, 0.7, 'cycle')
    pi = normalized(space.pi, space)
    after = apply_schedule(pi, [0, (1, 2), 3, 1])
    assert np.allclose(after.probs, space.pi, atol=1e-14)


def test_random_scan_spec_equals_kernel_power():
    space = ising_space(beta=0.6)
    kernel = random_scan_kernel(space)
    assert np.allclose(kernel.sum(axis=1), 1.0)
    assert np.allclose(space.pi @ kernel, space.pi, atol=1e-14)
    start = top_mass(space)
    law, mode = evaluate_spec(start, ScheduleSpec('random_scan', length=4))
    assert mode == 'kernel'
    expected = start.probs @ np.linalg.matrix_power(kernel, 4)
    assert np.allclose(law.probs, expected, atol=1e-13)
    by_scenarios, _ = evaluate_spec(start, ScheduleSpec('random_scan', length=4), mode='scenarios')
    assert np.allclose(by_scenarios.probs, expected, atol=1e-13)


def test_tv_curve_is_non_increasing():
    space = ising_space(4, 0.5, 'cycle')
    curve = tv_curve(top_mass(space), [0, 1, 2, 3, 0, 1, 2, 3], schedule_id='sys')
    assert list(curve.columns) == ['step', 'tv', 'schedule_id']
    assert len(curve) == 9
    assert np.all(np.diff(curve['tv'].to_numpy()) <= 1e-12)
    assert curve['tv'].iloc[0] == pytest.approx(tv_to_stationary(top_mass(space)))


def test_marginal_uses_pattern_codes():
    space = ising_space(2, 0.5)
    law = marginal(point_mass(space, 1), [1, 0])
    # state 1 is (+ at site 0, - at site 1): pattern s_1 + 2 s_0 = 2
    assert law.tolist() == [0.0, 0.0, 1.0, 0.0]
    pi_marginal = marginal(normalized(space.pi, space), [0])
    assert pi_marginal == pytest.approx([0.5, 0.5])


def test_increasing_ratio_starts():
    space = ising_space(beta=0.3)
    assert likelihood_ratio_increasing(top_mass(space)).ok
    assert likelihood_ratio_increasing(weakly_increasing_start(space, top_weight=0.4)).ok
    assert likelihood_ratio_increasing(weakly_increasing_start(space, upset_of=1)).ok
    report = likelihood_ratio_increasing(bottom_mass(space))
    assert not report.ok
    assert report.violation['ratio_sigma'] > report.violation['ratio_tau']


def test_updates_keep_ratio_increasing():
    space = ising_space(4, 0.8, 'cycle')
    mu = weakly_increasing_start(space, upset_of=3)
    for target in [0, 2, (1, 3), 1]:
        mu = apply_schedule(mu, [target])
        assert likelihood_ratio_increasing(mu).ok


def test_monotone_extension_agrees_on_omega():
    system = build_hardcore_bipartite(build_graph('cycle', n=4), lam=1.5)
    space = enumerate_states(system)
    mu = apply_schedule(top_mass(space), [0, 1])
    extension = monotone_extension(mu)
    assert extension.values.size == 16
    assert extension.agrees_with_ratio(mu)
    assert extension.is_increasing()


def test_systematic_mixing_at_infinite_temperature():
    # beta = 0: after k < n site updates TV = 1 - 2^-(n-k), and 0 after n
    space = ising_space(3, 0.0)
    result = mixing_time_exact(space, ScheduleSpec('systematic'), epsilon=0.25)
    assert result.steps == 3
    assert not result.capped
    assert [tv for _, tv in result.curve] == pytest.approx([0.875, 0.75, 0.5, 0.0], abs=1e-12)
    worst = mixing_time_exact(space, ScheduleSpec('systematic'), epsilon=0.25, start='worst')
    assert worst.steps == 3


def test_random_scan_mixing_matches_kernel_iteration():
    space = ising_space(3, 0.5)
    kernel = random_scan_kernel(space)
    row = top_mass(space).probs
    expected = 0
    while 0.5 * np.abs(row - space.pi).sum() > 0.25:
        row = row @ kernel
        expected += 1
    result = mixing_time_exact(space, ScheduleSpec('random_scan'), epsilon=0.25)
    assert result.steps == expected
    assert len(result.curve_frame()) == expected + 1


def test_alternating_mixing_counts_whole_rounds():
    space = ising_space(4, 0.5)
    result = mixing_time_exact(space, ScheduleSpec('alternating'), epsilon=0.1)
    assert result.steps % 4 == 0
    assert result.granularity == 4


def test_mixing_cap_and_epsilon_checks():
    space = ising_space(3, 3.0)
    capped = mixing_time_exact(space, ScheduleSpec('random_scan'), epsilon=0.01, cap=2)
    assert capped.capped and capped.steps is None
    with pytest.raises(ConfigError):
        mixing_time_exact(space, ScheduleSpec('random_scan'), epsilon=1.5)


def test_top_dominates_everything():
    space = ising_space(beta=0.4)
    pi = normalized(space.pi, space)
    assert stochastic_dominance(pi, top_mass(space)).dominates
    assert stochastic_dominance(bottom_mass(space), pi).dominates
    fails = stochastic_dominance(top_mass(space), pi)
    assert not fails.dominates
    assert fails.gap > 0.5


def test_flow_coupling_has_the_right_marginals():
    space = ising_space(3, 0.4)
    lower = normalized(space.pi, space)
    upper = weakly_increasing_start(space, top_weight=0.5)
    certificate = stochastic_dominance(lower, upper)
    assert certificate.dominates
    assert certificate.method == 'flow'
    left, right = coupling_marginals(certificate, space.size)
    assert np.allclose(left, lower.probs, atol=1e-9)
    assert np.allclose(right, upper.probs, atol=1e-9)
    assert all(space.leq[y, x] for y, x, _ in certificate.coupling)


def test_flow_finds_non_principal_upset():
    space = ising_space(2, 0.0)
    # indices: 0 = (-,-), 1 = (+,-), 2 = (-,+), 3 = (+,+)
    lower = DistVector(np.array([0.0, 0.5, 0.5, 0.0]), space)
    upper = DistVector(np.array([0.5, 0.0, 0.0, 0.5]), space)
    certificate = stochastic_dominance(lower, upper)
    assert not certificate.dominates
    assert certificate.method == 'flow'
    assert certificate.violating_upset == (1, 2, 3)
    assert certificate.gap == pytest.approx(0.5)


def heat_bath_matrix(space, site):
    """Single-site heat-bath kernel built state by state from the conditional law."""
    system = space.system
    matrix = np.zeros((space.size, space.size))
    for i in range(space.size):
        config = space.configuration(i)
        law = conditional_spin_distribution(system, config, site)
        for spin, p in enumerate(law):
            if p > 0:
                matrix[i, space.index_of(config.with_spin(site, spin))] += p
    return matrix


def first_hit(space, kernels, epsilon, every=1, cap=10000):
    """Least step t (a multiple of every) with TV(top after t kernels, pi) <= epsilon."""
    row = top_mass(space).probs
    for t in range(1, cap + 1):
        row = row @ kernels[(t - 1) % len(kernels)]
        if t % every == 0 and 0.5 * np.abs(row - space.pi).sum() <= epsilon:
            return t
    return None


def test_random_scan_tau_on_path3():
    space = ising_space(3, 0.4)
    averaged = sum(heat_bath_matrix(space, v) for v in range(3)) / 3
    expected = first_hit(space, [averaged], 0.25)
    result = mixing_time_exact(space, ScheduleSpec('random_scan'), epsilon=0.25)
    assert expected is not None
    assert result.steps == expected


@pytest.mark.parametrize('family,beta', [('cycle', 0.4), ('cycle', 0.2), ('cycle', 0.6),
                                         ('path', 0.2), ('path', 0.6)])
def test_scan_comparison_on_four_sites(family, beta):
    space = ising_space(4, beta, family)
    singles = [heat_bath_matrix(space, v) for v in range(4)]
    order = alternating_order(space.system.graph.bipartition)
    tau_a = first_hit(space, [singles[v] for v in order], 0.25, every=4)
    tau_s = first_hit(space, singles, 0.25)
    tau_r = first_hit(space, [sum(singles) / 4], 0.25)

    assert mixing_time_exact(space, ScheduleSpec('alternating'), epsilon=0.25).steps == tau_a
    assert mixing_time_exact(space, ScheduleSpec('systematic'), epsilon=0.25).steps == tau_s
    assert mixing_time_exact(space, ScheduleSpec('random_scan'), epsilon=0.25).steps == tau_r
    assert tau_s <= 2 * tau_a
    assert tau_r <= 2 * np.log(4) * tau_a
