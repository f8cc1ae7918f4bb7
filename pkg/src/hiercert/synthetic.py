"""Synthetic certification instances: spec files, canonical experiment
models, and random instance generators used by the simulation harness.

A synthetic spec is a JSON document describing per-component categorical
distributions, either as an explicit matrix or as blocks::

    {"class_count": 4, "seed": 7,
     "blocks": [{"count": 128, "distribution": [0.9, 0.1, 0, 0]},
                {"count": 128, "distribution": [0.4, 0.4, 0.1, 0.1]}]}

The categorical at each component is the exact push-forward of the base
model under input noise, so the smoothed model's true vertex probabilities
are known and guarantee statements can be verified.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DomainError
from .hierarchy import HierarchyGraph, VertexRecord
from .sampler import SyntheticModel


def load_synthetic_spec(path, seed: int | None = None) -> SyntheticModel:
    doc = json.loads(Path(path).read_text())
    return synthetic_from_dict(doc, seed=seed)


def synthetic_from_dict(doc: dict, seed: int | None = None) -> SyntheticModel:
    if seed is None:
        seed = int(doc.get("seed", 0))
    if "matrix" in doc:
        dists = np.asarray(doc["matrix"], dtype=np.float64)
    elif "blocks" in doc:
        class_count = int(doc["class_count"])
        rows = []
        for block in doc["blocks"]:
            dist = np.asarray(block["distribution"], dtype=np.float64)
            if dist.shape != (class_count,):
                raise DomainError(
                    f"block distribution has {dist.size} entries, "
                    f"expected {class_count}")
            rows.append(np.tile(dist, (int(block["count"]), 1)))
        dists = np.concatenate(rows, axis=0)
    else:
        raise DomainError("synthetic spec needs 'matrix' or 'blocks'")
    return SyntheticModel(dists, seed=seed)


def vertex_probabilities(model: SyntheticModel, hierarchy: HierarchyGraph) -> np.ndarray:
    """True smoothed probability of every vertex at every component,
    i.e. the summed leaf probabilities of the vertex's descendants."""
    member = np.zeros((hierarchy.vertex_count, hierarchy.leaf_count))
    for y in range(hierarchy.leaf_count):
        for v in _chain(hierarchy, y):
            member[v, y] = 1.0
    return model.distributions @ member.T


def _chain(hierarchy: HierarchyGraph, leaf: int):
    u = leaf
    while u is not None:
        yield u
        u = hierarchy.parent_of(u)


# --- canonical experiment instances -------------------------------------------

def two_group_hierarchy() -> HierarchyGraph:
    """Four leaves in two sibling pairs under two level-1 parents."""
    return HierarchyGraph([
        VertexRecord(0, "leaf_a", 0, 4), VertexRecord(1, "leaf_b", 0, 4),
        VertexRecord(2, "leaf_c", 0, 5), VertexRecord(3, "leaf_d", 0, 5),
        VertexRecord(4, "group_ab", 1, None), VertexRecord(5, "group_cd", 1, None),
    ], level_count=2)


def boundary_model(components: int, tau: float, seed: int = 0) -> SyntheticModel:
    """Every vertex probability is <= tau (the level-1 group over the two
    dominant leaves sits exactly at tau), so certifying any component at
    any level is a type-I error.  Pairs with :func:`two_group_hierarchy`."""
    dist = np.array([tau / 2, tau / 2, (1 - tau) / 2, (1 - tau) / 2])
    return SyntheticModel(np.tile(dist, (components, 1)), seed=seed)


def mixed_model(components: int, seed: int = 0) -> SyntheticModel:
    """Half confident leaf components, half components fluctuating between
    two sibling leaves (their shared parent has probability one).  Pairs
    with :func:`two_group_hierarchy`."""
    confident = np.array([0.98, 0.01, 0.005, 0.005])
    fluctuating = np.array([0.5, 0.5, 0.0, 0.0])
    half = components // 2
    dists = np.vstack([np.tile(confident, (components - half, 1)),
                       np.tile(fluctuating, (half, 1))])
    return SyntheticModel(dists, seed=seed)


# --- random instances -----------------------------------------------------------

def random_hierarchy(rng: np.random.Generator, max_levels: int = 4,
                     max_leaves: int = 12) -> HierarchyGraph:
    """Random single-parent forest with explicit levels.

    Leaves occupy ids 0..|Y|-1; each vertex gets a parent from some higher
    level with probability 0.8 (so chainless leaves and short chains occur),
    and every non-leaf vertex is guaranteed at least one child.
    """
    level_count = int(rng.integers(1, max_levels + 1))
    leaves = int(rng.integers(2, max_leaves + 1))
    sizes = [leaves]
    for _ in range(1, level_count):
        upper = max(1, sizes[-1] // 2)
        sizes.append(int(rng.integers(1, upper + 1)))

    records: list[VertexRecord] = []
    ids_per_level: list[list[int]] = []
    next_id = 0
    for lvl, size in enumerate(sizes):
        ids = list(range(next_id, next_id + size))
        ids_per_level.append(ids)
        next_id += size
        for i in ids:
            records.append(VertexRecord(i, f"v{i}", lvl, None))

    parent: dict[int, int | None] = {r.id: None for r in records}
    for lvl in range(level_count - 1):
        upper_levels = [u for us in ids_per_level[lvl + 1:] for u in us]
        if not upper_levels:
            continue
        for i in ids_per_level[lvl]:
            if rng.random() < 0.8:
                parent[i] = int(rng.choice(upper_levels))
    # guarantee each non-leaf vertex a child so generality stays positive
    for lvl in range(1, level_count):
        for u in ids_per_level[lvl]:
            if u not in parent.values():
                lower = [c for cs in ids_per_level[:lvl] for c in cs]
                child = int(rng.choice(lower))
                parent[child] = u

    records = [VertexRecord(r.id, r.name, r.level, parent[r.id]) for r in records]
    try:
        return HierarchyGraph(records, level_count)
    except Exception:
        # reassignment above can rarely orphan an upper vertex again; retry
        return random_hierarchy(rng, max_levels, max_leaves)


def random_distributions(rng: np.random.Generator, components: int,
                         class_count: int, concentration: float = 0.5) -> np.ndarray:
    """Dirichlet-distributed per-component categoricals; small concentration
    yields spiky rows, occasionally near ties."""
    return rng.dirichlet(np.full(class_count, concentration), size=components)


def random_thresholds(rng: np.random.Generator, max_level: int) -> tuple:
    count = int(rng.integers(0, max_level + 1))
    if count == 0:
        return ()
    vals = np.sort(rng.random(count))[::-1]
    return tuple(float(v) for v in vals)
