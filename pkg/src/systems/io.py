"""
System-definition files (JSON).

Format:
    {
      "name": "ising-P3",                       (optional)
      "spins": ["-", "+"],
      "sites": 3,
      "edges": [[0, 1], [1, 2]],
      "pair_potential": {"-": {"-": w, "+": w}, "+": {...}},
      "site_potential": {"default": {"-": w, "+": w}, "2": {...}},
      "constraint": "none" | "hardcore",
      "bipartition": [0, 1, 0],                 (optional)
      "monotone_flip": true                     (optional, flips order on label-1 sites)
    }

Saving writes sorted keys with two-space indentation, so load -> save is
byte-stable.
"""

import json
from collections import Counter
from typing import Any, Dict, Union
import sys
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))
from systems.gibbs import GibbsSystem, SiteGraph, SpinSpace
from utils.exceptions import ModelError
from utils.logger import setup_logger

logger = setup_logger(__name__)


def _spin_row(table: Dict[str, Any], spins: SpinSpace, what: str) -> np.ndarray:
    missing = [s for s in spins.values if s not in table]
    if missing:
        raise ModelError(f"{what} is missing spins {missing}")
    return np.array([float(table[s]) for s in spins.values])


def system_from_dict(data: Dict[str, Any]) -> GibbsSystem:
    """Build a GibbsSystem from the JSON system-definition mapping."""
    try:
        spins = SpinSpace(tuple(data['spins']))
        n_sites = int(data['sites'])
        edges = tuple(tuple(e) for e in data.get('edges', []))
        pair_table = data['pair_potential']
    except KeyError as e:
        raise ModelError(f"system definition is missing {e}")

    pair = np.vstack([_spin_row(pair_table.get(s, {}), spins, f"pair_potential[{s}]") for s in spins.values])

    site_table = data.get('site_potential', {})
    default = site_table.get('default', {s: 1.0 for s in spins.values})
    site = np.tile(_spin_row(default, spins, 'site_potential.default'), (n_sites, 1))
    for key, row in site_table.items():
        if key == 'default':
            continue
        v = int(key)
        if not 0 <= v < n_sites:
            raise ModelError(f"site_potential override for unknown site {key}")
        site[v] = _spin_row(row, spins, f"site_potential[{key}]")

    bipartition = data.get('bipartition')
    graph = SiteGraph(n_sites, edges, tuple(bipartition) if bipartition is not None else None,
                      name=data.get('graph_name', 'custom'))

    flip = ()
    if data.get('monotone_flip'):
        if graph.bipartition is None:
            raise ModelError("monotone_flip needs a bipartition")
        flip = tuple(label == 1 for label in graph.bipartition)

    return GibbsSystem(
        graph=graph,
        spins=spins,
        pair_potential=pair,
        site_potential=site,
        constraint=data.get('constraint', 'none'),
        order_flip=flip,
        name=data.get('name', ''),
        params=dict(data.get('params', {})),
    )


def system_to_dict(system: GibbsSystem) -> Dict[str, Any]:
    """Inverse of system_from_dict (extra factors and callable constraints are not serializable)."""
    if system.extra_factors or callable(system.constraint):
        raise ModelError("systems with extra factors or callable constraints cannot be saved")
    labels = system.spins.values

    def row(values) -> Dict[str, float]:
        return {labels[s]: float(values[s]) for s in range(len(labels))}

    rows = [tuple(r) for r in system.site_potential.tolist()]
    common = Counter(rows).most_common(1)[0][0]
    site_table: Dict[str, Any] = {'default': row(common)}
    for v, r in enumerate(rows):
        if r != common:
            site_table[str(v)] = row(r)

    data: Dict[str, Any] = {
        'spins': list(labels),
        'sites': system.n_sites,
        'edges': [list(e) for e in system.graph.edges],
        'pair_potential': {labels[a]: row(system.pair_potential[a]) for a in range(len(labels))},
        'site_potential': site_table,
        'constraint': system.constraint,
        'graph_name': system.graph.name,
    }
    if system.name:
        data['name'] = system.name
    if system.params:
        data['params'] = dict(system.params)
    if system.graph.bipartition is not None:
        data['bipartition'] = list(system.graph.bipartition)
        if any(system.order_flip):
            data['monotone_flip'] = True
    return data


def dumps_system(system: GibbsSystem) -> str:
    return json.dumps(system_to_dict(system), sort_keys=True, indent=2) + '\n'


def load_system(path: Union[str, Path]) -> GibbsSystem:
    """Load a system-definition file."""
    path = Path(path)
    if not path.exists():
        raise ModelError(f"system file not found: {path}")
    with open(path, 'r') as f:
        system = system_from_dict(json.load(f))
    logger.info(f"Loaded system {system.describe()} from {path}")
    return system


def save_system(system: GibbsSystem, path: Union[str, Path]) -> None:
    """Write a system-definition file."""
    with open(path, 'w') as f:
        f.write(dumps_system(system))
    logger.info(f"Saved system {system.describe()} to {path}")
