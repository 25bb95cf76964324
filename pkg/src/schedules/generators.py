"""
Schedule generators: random scan, systematic scan, alternating (parity)
scan, global block updates, random parity phases and birthday thinning.
"""

from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple
import sys
from pathlib import Path

sys.path.append(str(Path(__file__).parent.parent))
from models.graphs import build_graph, cube_block, torus_site
from schedules.censoring import censor
from schedules.schedule import Schedule
from systems.gibbs import Block, SiteGraph
from utils.exceptions import ScheduleError
from utils.logger import setup_logger
from utils.rng import make_rng

logger = setup_logger(__name__)


def random_schedule(n_sites: int, T: int, seed: int) -> Schedule:
    """T i.i.d. uniform sites from the (seed, 'sites') stream."""
    if T < 0:
        raise ScheduleError(f"schedule length must be nonnegative, got {T}")
    if n_sites < 1:
        raise ScheduleError("random schedule needs at least one site")
    sites = make_rng(seed, 'sites').integers(0, n_sites, size=T)
    return Schedule(tuple(int(v) for v in sites), provenance=f"random(n={n_sites},T={T})", seed=seed)


def systematic_schedule(permutation: Sequence[int], rounds: int = 1) -> Schedule:
    """rounds passes through the sites in permutation order."""
    permutation = [int(v) for v in permutation]
    if sorted(permutation) != list(range(len(permutation))):
        raise ScheduleError(f"{permutation} is not a permutation of 0..{len(permutation) - 1}")
    if rounds < 0:
        raise ScheduleError(f"rounds must be nonnegative, got {rounds}")
    return Schedule(tuple(permutation) * rounds, provenance=f"systematic(rounds={rounds})",
                    metadata={'permutation': permutation})


def alternating_order(bipartition: Optional[Sequence[int]]) -> List[int]:
    """One round: label-0 sites ascending, then label-1 sites ascending."""
    if bipartition is None:
        raise ScheduleError("alternating schedule needs a bipartite graph")
    first = [v for v, label in enumerate(bipartition) if label == 0]
    second = [v for v, label in enumerate(bipartition) if label == 1]
    return first + second


def alternating_schedule(bipartition: Optional[Sequence[int]], rounds: int = 1) -> Schedule:
    """
    Parity scan, counted as n single-site updates per round. Sites of the
    same class do not interact, so updating them one at a time equals the
    simultaneous update.
    """
    order = alternating_order(bipartition)
    return Schedule(tuple(order) * rounds, provenance=f"alternating(rounds={rounds})",
                    metadata={'round_length': len(order)})


def global_block_blocks(d: int, N: int, ell: int, offset: Sequence[int]) -> List[Block]:
    """Blocks anchored at offset + (ell+1)k, checked disjoint and boundary-separated."""
    if (N % (ell + 1)) != 0:
        raise ScheduleError(f"global block updates need (ell+1) | N, got ell={ell}, N={N}")
    offset = [int(j) for j in offset]
    if len(offset) != d or any(not 0 <= j <= ell for j in offset):
        raise ScheduleError(f"offset must be a vector in {{0..{ell}}}^{d}, got {offset}")
    per_axis = N // (ell + 1)
    anchors = sorted(
        torus_site(N, [offset[k] + (ell + 1) * m[k] for k in range(d)])
        for m in product(range(per_axis), repeat=d)
    )
    blocks = [cube_block(d, N, ell, a) for a in anchors]

    graph = build_graph('torus', d=d, N=N)
    owner: Dict[int, int] = {}
    for i, block in enumerate(blocks):
        for v in block:
            if v in owner:
                raise ScheduleError(f"blocks {owner[v]} and {i} overlap at site {v}")
            owner[v] = i
    for i, block in enumerate(blocks):
        for u in graph.boundary(block):
            if u in owner:
                raise ScheduleError(f"block {i} has exterior neighbour {u} inside block {owner[u]}")
    return blocks


def global_block_schedule(d: int, N: int, ell: int, offset: Sequence[int]) -> Schedule:
    """One global block update: every block of the shifted (ell+1)-lattice."""
    blocks = global_block_blocks(d, N, ell, offset)
    return Schedule(tuple(blocks), provenance=f"global_block(d={d},N={N},ell={ell},j={tuple(offset)})",
                    metadata={'offset': list(offset)})


def all_offsets(d: int, ell: int) -> List[Tuple[int, ...]]:
    return list(product(range(ell + 1), repeat=d))


def alternating_parity_phases(stream: Sequence[int], bipartition: Optional[Sequence[int]]) -> Schedule:
    """
    Censor a stream of uniform sites into parity phases: keep label-0 draws
    until every label-0 site has been drawn, then switch to label 1, and so on.

    The result records the kept mask over the stream, the stream positions
    at which each phase ended, and kept/total draw counts.
    """
    if bipartition is None:
        raise ScheduleError("parity phases need a bipartite graph")
    classes = [set(v for v, label in enumerate(bipartition) if label == c) for c in (0, 1)]
    parity = 0 if classes[0] else 1
    hit = set()
    mask = []
    phase_ends = []
    for position, site in enumerate(stream):
        site = int(site)
        keep = bipartition[site] == parity
        mask.append(keep)
        if keep:
            hit.add(site)
            if hit == classes[parity]:
                phase_ends.append(position)
                hit = set()
                if classes[1 - parity]:
                    parity = 1 - parity

    base = Schedule(tuple(int(v) for v in stream), provenance='stream')
    kept = censor(base, mask)
    return Schedule(
        kept.steps,
        provenance=f"parity_phases(T={len(stream)})",
        metadata={
            'mask': mask,
            'phase_ends': phase_ends,
            'kept_draws': int(sum(mask)),
            'total_draws': len(mask),
        },
    )


def birthday_thinning(graph: SiteGraph, seed: int, *stream) -> List[int]:
    """
    Draw uniform sites and keep them until a draw equals or neighbours an
    already kept site; that draw is discarded and collection stops.
    The kept sites form an independent set, listed in draw order.
    """
    rng = make_rng(seed, 'birthday', *stream)
    kept: List[int] = []
    blocked = set()
    while True:
        v = int(rng.integers(0, graph.n_sites))
        if v in blocked:
            return kept
        kept.append(v)
        blocked.add(v)
        blocked.update(graph.neighbors[v])


def birthday_schedule(base: Schedule, kept: Sequence[int]) -> Schedule:
    """The base round restricted to the kept sites, in base order."""
    kept = set(int(v) for v in kept)
    thinned = censor(base, lambda t: t in kept if isinstance(t, int) else False)
    return Schedule(thinned.steps, provenance=f"birthday({base.provenance})", seed=base.seed,
                    metadata={'kept': sorted(kept)})
