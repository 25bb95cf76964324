"""
Tests for models: graph families, torus geometry, subgraphs and model specs.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent / 'src'))

from models.graphs import (
    arc_blocks,
    build_graph,
    cube_block,
    cut_vertices_between,
    induced_subgraph,
    torus_blocks,
    torus_coordinates,
    torus_site,
)
from models.spin_models import ModelSpec, build_system
from utils.config import setting
from utils.exceptions import ModelError


def test_path_and_cycle():
    path = build_graph('path', n=4)
    cycle = build_graph('cycle', n=4)
    assert path.edges == ((0, 1), (1, 2), (2, 3))
    assert cycle.edges == ((0, 1), (0, 3), (1, 2), (2, 3))
    assert path.bipartition == (0, 1, 0, 1)
    assert cycle.max_degree == 2


def test_odd_cycle_and_complete_graph_are_not_bipartite():
    assert build_graph('cycle', n=5).bipartition is None
    assert build_graph('complete', n=3).bipartition is None
    assert len(build_graph('complete', n=4).edges) == 6


def test_tree_sizes():
    tree = build_graph('tree', b=2, depth=3)
    assert tree.n_sites == 15
    assert len(tree.edges) == 14
    assert tree.is_bipartite


def test_torus_is_regular():
    torus = build_graph('torus', d=2, N=4)
    assert torus.n_sites == 16
    assert set(torus.degrees) == {4}
    assert len(torus.edges) == 32


def test_torus_coordinates_round_trip():
    for site in range(27):
        assert torus_site(3, torus_coordinates(3, 3, site)) == site
    assert torus_coordinates(2, 4, 5) == (1, 1)


def test_cube_block_wraps():
    assert cube_block(1, 6, 2, 5) == (0, 5)
    assert cube_block(2, 3, 2, 8) == (0, 2, 6, 8)
    assert len(torus_blocks(2, 3, 2)) == 9
    assert arc_blocks(6, 2)[0] == (0, 1)


def test_cube_block_side_checked():
    with pytest.raises(ModelError):
        cube_block(1, 4, 5, 0)


def test_boundary_of_arc():
    cycle = build_graph('cycle', n=6)
    assert cycle.boundary((1, 2)) == (0, 3)
    assert cycle.boundary(range(6)) == ()


def test_custom_graph_and_bad_edges():
    graph = build_graph('custom', n=3, edges=[[0, 2]])
    assert graph.edges == ((0, 2),)
    with pytest.raises(ModelError):
        build_graph('custom', n=2, edges=[[0, 3]])
    with pytest.raises(ModelError):
        build_graph('hexagon', n=6)


def test_induced_subgraph_and_cut_vertex():
    graph = build_graph('custom', n=5, edges=[[0, 1], [1, 2], [0, 2], [2, 3], [3, 4]])
    sub, mapping = induced_subgraph(graph, [2, 3, 4])
    assert mapping == {2: 0, 3: 1, 4: 2}
    assert sub.edges == ((0, 1), (1, 2))
    assert cut_vertices_between(graph, [2, 3, 4]) == (2,)
    assert cut_vertices_between(graph, [0, 1, 2]) == (2,)
    assert cut_vertices_between(graph, [1, 3]) == (1, 3)
    assert cut_vertices_between(graph, range(5)) == ()


def test_model_spec_dispatch():
    spec = ModelSpec.from_dict({'kind': 'ising', 'family': 'cycle', 'graph_params': {'n': 4}, 'beta': 0.2})
    system = build_system(spec)
    assert system.params == {'beta': 0.2, 'h': 0.0}
    assert np.allclose(system.pair_potential, [[np.exp(0.2), np.exp(-0.2)], [np.exp(-0.2), np.exp(0.2)]])
    assert spec.label() == 'ising-cyclen4-b0.2-h0'


def test_hardcore_spec():
    system = build_system(ModelSpec('hardcore', 'cycle', {'n': 4}, lam=0.5))
    assert system.constraint == 'hardcore'
    assert system.order_flip == (False, True, False, True)


def test_model_spec_rejects_unknown_fields():
    with pytest.raises(ModelError):
        ModelSpec.from_dict({'kind': 'ising', 'temperature': 2.0})
    with pytest.raises(ModelError):
        build_system(ModelSpec('potts', 'path', {'n': 2}))


def test_settings_are_copies():
    tolerances = setting('tolerances')
    tolerances['inequality'] = -1.0
    assert setting('tolerances')['inequality'] != -1.0
    assert setting('montecarlo.coupon_band') == 0.05
    assert setting('montecarlo.missing', 'fallback') == 'fallback'
