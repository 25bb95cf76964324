"""
Graph families: paths, cycles, complete graphs, d-dimensional tori,
b-ary trees, edgeless graphs and custom edge lists.

Bipartition labels are attached whenever the graph is bipartite; the
lowest site of every connected component gets label 0.
"""

from itertools import product
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple
import sys
from pathlib import Path

import networkx as nx

sys.path.append(str(Path(__file__).parent.parent))
from systems.gibbs import Block, SiteGraph
from utils.config import load_json
from utils.exceptions import ModelError
from utils.logger import setup_logger

logger = setup_logger(__name__)

FAMILIES = ('path', 'cycle', 'complete', 'torus', 'tree', 'edgeless', 'custom')


def bipartition_labels(graph: nx.Graph) -> Optional[Tuple[int, ...]]:
    """Two-colouring with label 0 on the lowest node of each component, or None."""
    if not nx.is_bipartite(graph):
        return None
    labels = {}
    for component in nx.connected_components(graph):
        root = min(component)
        for node, depth in nx.single_source_shortest_path_length(graph.subgraph(component), root).items():
            labels[node] = depth % 2
    return tuple(labels[v] for v in range(graph.number_of_nodes()))


def from_networkx(graph: nx.Graph, name: str = 'custom') -> SiteGraph:
    """Convert a networkx graph, relabelling nodes 0..n-1 in sorted order."""
    graph = nx.convert_node_labels_to_integers(graph, ordering='sorted')
    return SiteGraph(
        n_sites=graph.number_of_nodes(),
        edges=tuple(graph.edges()),
        bipartition=bipartition_labels(graph),
        name=name,
    )


def torus_coordinates(d: int, N: int, site: int) -> Tuple[int, ...]:
    """Coordinates of a torus site; coordinate 0 varies fastest."""
    return tuple((site // N ** k) % N for k in range(d))


def torus_site(N: int, coords: Sequence[int]) -> int:
    return int(sum((c % N) * N ** k for k, c in enumerate(coords)))


def torus_graph(d: int, N: int) -> nx.Graph:
    if d < 1 or N < 2:
        raise ModelError(f"torus needs d >= 1 and N >= 2, got d={d}, N={N}")
    graph = nx.Graph()
    n = N ** d
    graph.add_nodes_from(range(n))
    for v in range(n):
        x = torus_coordinates(d, N, v)
        for k in range(d):
            shifted = list(x)
            shifted[k] = (x[k] + 1) % N
            w = torus_site(N, shifted)
            if w != v:
                graph.add_edge(v, w)
    return graph


def build_graph(family: str, **params: Any) -> SiteGraph:
    """
    Build a graph from a family name and its parameters.

    Args:
        family: path(n) | cycle(n) | complete(n) | torus(d, N) | tree(b, depth)
                | edgeless(n) | custom(edges, n) or custom(file)

    Returns:
        SiteGraph with bipartition labels when bipartite
    """
    if family not in FAMILIES:
        raise ModelError(f"unknown graph family {family!r}; expected one of {FAMILIES}")

    if family == 'torus':
        d, N = int(params.get('d', 2)), int(params['N'])
        return from_networkx(torus_graph(d, N), name=f"torus-{d}d-{N}")

    if family == 'tree':
        b, depth = int(params['b']), int(params['depth'])
        if b < 2 or depth < 1:
            raise ModelError(f"tree needs b >= 2 and depth >= 1, got b={b}, depth={depth}")
        return from_networkx(nx.balanced_tree(b, depth), name=f"tree-{b}-{depth}")

    if family == 'custom':
        if 'file' in params:
            path = Path(params['file'])
            if not path.exists():
                raise ModelError(f"graph file not found: {path}")
            data = load_json(str(path))
            n, edges = int(data['sites']), data.get('edges', [])
        else:
            n, edges = int(params['n']), params.get('edges', [])
        graph = nx.empty_graph(n)
        graph.add_edges_from(tuple(e) for e in edges)
        if graph.number_of_nodes() != n:
            raise ModelError(f"custom graph edges reference sites outside 0..{n - 1}")
        return from_networkx(graph, name=params.get('name', 'custom'))

    n = int(params['n'])
    if n < 1:
        raise ModelError(f"{family} needs n >= 1, got {n}")
    if family == 'path':
        graph = nx.path_graph(n)
    elif family == 'cycle':
        if n < 3:
            raise ModelError(f"cycle needs n >= 3, got {n}")
        graph = nx.cycle_graph(n)
    elif family == 'complete':
        graph = nx.complete_graph(n)
    else:
        graph = nx.empty_graph(n)
    return from_networkx(graph, name=f"{family}-{n}")


def cube_block(d: int, N: int, ell: int, anchor: int) -> Block:
    """Side-ell cube anchored at a torus site, with wraparound."""
    if not 1 <= ell <= N:
        raise ModelError(f"block side {ell} must be in 1..{N}")
    x = torus_coordinates(d, N, anchor)
    sites = {torus_site(N, [x[k] + o[k] for k in range(d)]) for o in product(range(ell), repeat=d)}
    return tuple(sorted(sites))


def torus_blocks(d: int, N: int, ell: int) -> List[Block]:
    """All N^d anchored cubes; block identity is the anchor index."""
    return [cube_block(d, N, ell, a) for a in range(N ** d)]


def arc_blocks(n: int, ell: int) -> List[Block]:
    """All cyclic arcs of length ell on C_n (the d=1 torus blocks)."""
    return torus_blocks(1, n, ell)


def induced_subgraph(graph: SiteGraph, sites: Iterable[int]) -> Tuple[SiteGraph, Dict[int, int]]:
    """
    Subgraph induced on sites, relabelled 0..k-1 in increasing order.

    Returns:
        (subgraph, mapping from original site to new site)
    """
    sites = sorted(set(int(v) for v in sites))
    mapping = {v: i for i, v in enumerate(sites)}
    sub = graph.to_networkx().subgraph(sites).copy()
    sub = nx.relabel_nodes(sub, mapping)
    return from_networkx(sub, name=f"{graph.name}[{len(sites)}]"), mapping


def cut_vertices_between(graph: SiteGraph, part: Iterable[int]) -> Block:
    """Sites of part adjacent to at least one site outside part."""
    part = set(int(v) for v in part)
    return tuple(sorted(v for v in part if any(w not in part for w in graph.neighbors[v])))
