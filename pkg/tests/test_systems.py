"""
Tests for systems: enumeration, stationary laws, order, certificates and system files.
"""

import sys
from itertools import product
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent / 'src'))

from models.graphs import build_graph
from models.spin_models import ModelSpec, build_hardcore_bipartite, build_ising, build_system
from systems.certification import verify_markov_field, verify_monotone
from systems.gibbs import Configuration, GibbsSystem, SiteGraph, SpinSpace, config_from_labels
from systems.io import dumps_system, load_system, save_system, system_from_dict
from systems.state_space import conditional_spin_distribution, enumerate_states
from utils.exceptions import BudgetExceededError, ConstraintError, ModelError

CONFIG_DIR = Path(__file__).parent.parent / 'config'


def ising(family='path', n=3, beta=0.4, h=0.0):
    return build_system(ModelSpec('ising', family, {'n': n}, beta=beta, h=h))


def brute_force_ising_pi(n, edges, beta, h):
    """pi over codes with site 0 fastest, spin index 0 = '-'."""
    weights = []
    for code in range(2 ** n):
        spins = [1 if (code >> v) & 1 else -1 for v in range(n)]
        energy = beta * sum(spins[u] * spins[v] for u, v in edges) + h * sum(spins)
        weights.append(np.exp(energy))
    weights = np.array(weights)
    return weights / weights.sum()


@pytest.mark.parametrize('beta,h', [(0.0, 0.0), (0.4, 0.0), (1.0, 0.3)])
def test_ising_pi_matches_direct_formula(beta, h):
    system = ising('cycle', 4, beta, h)
    space = enumerate_states(system)
    expected = brute_force_ising_pi(4, [(0, 1), (1, 2), (2, 3), (0, 3)], beta, h)
    assert space.size == 16
    assert np.allclose(space.pi, expected[space.codes], atol=1e-14)
    assert space.pi.sum() == pytest.approx(1.0, abs=1e-12)


def test_codes_put_site_zero_fastest():
    space = enumerate_states(ising())
    assert list(space.codes) == list(range(8))
    assert tuple(space.states[1]) == (1, 0, 0)
    assert space.index_of(Configuration((0, 1, 0))) == 2


def test_hardcore_omega_is_independent_sets():
    system = build_hardcore_bipartite(build_graph('cycle', n=4), lam=1.0)
    space = enumerate_states(system)
    # empty set, four singletons, two diagonals
    assert space.size == 7
    assert np.allclose(space.pi, 1.0 / 7)
    assert system.top_configuration().spins == (1, 0, 1, 0)
    assert system.bottom_configuration().spins == (0, 1, 0, 1)
    assert space.configuration(space.top_index).spins == (1, 0, 1, 0)


def test_hardcore_fugacity_weights():
    system = build_hardcore_bipartite(build_graph('path', n=2), lam=2.0)
    space = enumerate_states(system)
    # Omega = {00, 10, 01}: weights 1, 2, 2
    assert space.size == 3
    assert np.allclose(space.pi, [0.2, 0.4, 0.4])


def test_ising_top_and_order():
    system = ising()
    top = system.top_configuration()
    assert top.labels(system.spins) == ('+', '+', '+')
    mixed = config_from_labels(system, ['+', '-', '+'])
    assert system.leq(mixed, top)
    assert not system.leq(top, mixed)


def test_conditional_spin_distribution_is_logistic():
    beta = 0.5
    system = ising('path', 3, beta)
    law = conditional_spin_distribution(system, system.top_configuration(), 1)
    expected_plus = np.exp(2 * beta) / (np.exp(2 * beta) + np.exp(-2 * beta))
    assert law[1] == pytest.approx(expected_plus, abs=1e-14)
    assert law.sum() == pytest.approx(1.0)


def test_conditional_spin_distribution_respects_hard_constraint():
    system = build_hardcore_bipartite(build_graph('path', n=3), lam=1.0)
    # neighbour occupied: site 1 must stay empty
    law = conditional_spin_distribution(system, Configuration((1, 0, 0)), 1)
    assert law.tolist() == [1.0, 0.0]


def test_non_member_rejected():
    system = build_hardcore_bipartite(build_graph('path', n=2), lam=1.0)
    space = enumerate_states(system)
    with pytest.raises(ConstraintError):
        space.index_of(Configuration((1, 1)))
    with pytest.raises(ConstraintError):
        conditional_spin_distribution(system, Configuration((1, 1)), 0)


def test_enumeration_budget():
    with pytest.raises(BudgetExceededError):
        enumerate_states(ising('path', 10), budget=2 ** 9)


def test_invalid_systems():
    graph = build_graph('path', n=2)
    with pytest.raises(ModelError):
        GibbsSystem(graph, SpinSpace(('-', '+')), np.array([[1.0, 2.0], [1.0, 1.0]]), np.ones(2))
    with pytest.raises(ModelError):
        GibbsSystem(graph, SpinSpace(('-', '+')), np.ones((2, 2)), np.array([1.0, 0.0]))
    with pytest.raises(ModelError):
        SiteGraph(2, ((0, 0),))
    with pytest.raises(ModelError):
        build_hardcore_bipartite(build_graph('cycle', n=3), lam=1.0)


@pytest.mark.parametrize('beta', [0.0, 0.4, 1.5])
def test_ferromagnet_is_monotone(beta):
    system = ising('cycle', 4, beta)
    report = verify_monotone(system, enumerate_states(system))
    assert report.ok
    assert report.pairs_checked > 0


def test_antiferromagnet_is_refused():
    system = ising('path', 3, -0.5)
    report = verify_monotone(system, enumerate_states(system))
    assert not report.ok
    assert report.violation['gap'] > 0


def test_antiferromagnet_witness_on_an_edge():
    system = ising('path', 2, -0.7)
    report = verify_monotone(system, enumerate_states(system))
    assert not report.ok
    violation = report.violation
    assert violation['sigma'] == ['-', '-']
    assert violation['tau'] == ['+', '-']
    assert violation['site'] == 1
    # the witness set is upward closed: a tail of the spin order
    labels = list(system.spins.values)
    assert violation['upset'] == labels[len(labels) - len(violation['upset']):]
    sigma = config_from_labels(system, violation['sigma'])
    tau = config_from_labels(system, violation['tau'])
    plus = labels.index('+')
    assert conditional_spin_distribution(system, sigma, 1)[plus] > conditional_spin_distribution(system, tau, 1)[plus]


def test_hardcore_needs_order_flip():
    graph = build_graph('cycle', n=4)
    flipped = build_hardcore_bipartite(graph, 1.0, monotone=True)
    plain = build_hardcore_bipartite(graph, 1.0, monotone=False)
    assert verify_monotone(flipped, enumerate_states(flipped)).ok
    assert not verify_monotone(plain, enumerate_states(plain)).ok


def test_markov_field_holds_for_pair_potentials():
    system = ising('path', 4, 0.7)
    space = enumerate_states(system)
    for block in [(0,), (1, 2), (3,)]:
        assert verify_markov_field(system, space, block).ok


def test_markov_field_fails_with_long_range_factor():
    base = ising('path', 3, 0.3)
    system = GibbsSystem(base.graph, base.spins, base.pair_potential, base.site_potential,
                         extra_factors=(((0, 2), np.array([[2.0, 1.0], [1.0, 2.0]])),))
    report = verify_markov_field(system, enumerate_states(system), (0,))
    assert not report.ok
    assert report.violation['max_diff'] > 0


def test_system_file_matches_constructor():
    loaded = load_system(CONFIG_DIR / 'systems' / 'ising_p3_b0.4.json')
    built = build_ising(build_graph('path', n=3), 0.4)
    assert np.allclose(enumerate_states(loaded).pi, enumerate_states(built).pi, atol=1e-15)


def test_system_file_save_is_stable(tmp_path):
    system = build_hardcore_bipartite(build_graph('cycle', n=4), lam=0.5)
    path = tmp_path / 'hardcore.json'
    save_system(system, path)
    reloaded = load_system(path)
    assert dumps_system(reloaded) == path.read_text()
    assert reloaded.order_flip == system.order_flip
    assert reloaded.constraint == 'hardcore'


def test_system_file_missing_spin_row():
    with pytest.raises(ModelError):
        system_from_dict({'spins': ['-', '+'], 'sites': 2, 'edges': [[0, 1]],
                          'pair_potential': {'-': {'-': 1.0}, '+': {'-': 1.0, '+': 1.0}}})


def test_product_states_listed_once():
    system = ising('edgeless', 3, 0.0)
    space = enumerate_states(system)
    assert {tuple(s) for s in space.states} == set(product([0, 1], repeat=3))
