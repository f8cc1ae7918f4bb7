"""Semantic class hierarchy: a forest of single-parent vertices with explicit levels.

Level 0 holds the leaf classes (the flat label space of the base model);
higher levels group them into coarser semantic concepts.  The structure is
immutable after load and safe for unsynchronized concurrent reads.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CycleDetectedError,
    DanglingParentError,
    DomainError,
    EmptyLeafSetError,
    HierarchyError,
    LevelInversionError,
    MultipleParentsError,
)


@dataclass(frozen=True)
class VertexRecord:
    """One vertex of the hierarchy; ``parent`` is None for chain tops."""

    id: int
    name: str
    level: int
    parent: int | None = None


class HierarchyGraph:
    """Validated class hierarchy.

    Invariants enforced at construction:

    * every vertex has at most one parent, and ``level(parent) > level(child)``;
    * the parent relation is acyclic (checked structurally, before levels);
    * leaves are exactly the level-0 vertices and occupy ids ``0..leaf_count-1``;
    * every vertex has at least one leaf descendant.
    """

    def __init__(self, vertices: list[VertexRecord], level_count: int,
                 colors: dict[int, str] | None = None):
        self._vertices = tuple(vertices)
        self._level_count = int(level_count)
        self.colors = dict(colors or {})
        self._validate()
        self._parent = np.array(
            [-1 if v.parent is None else v.parent for v in self._vertices],
            dtype=np.int64,
        )
        self._levels = np.array([v.level for v in self._vertices], dtype=np.int64)
        self._leaf_count = int(np.sum(self._levels == 0))
        self._generality = self._compute_generality()
        self._ancestors = self._compute_ancestor_table()

    # -- construction -------------------------------------------------------

    def _validate(self) -> None:
        n = len(self._vertices)
        if n == 0:
            raise EmptyLeafSetError("hierarchy has no vertices")
        if self._level_count < 1:
            raise HierarchyError(f"level count must be >= 1, got {self._level_count}")
        if self._level_count > 256:
            # result records store the level as u8; deeper declarations are
            # almost certainly a typo and would explode the ancestor table
            raise HierarchyError(
                f"level count {self._level_count} exceeds the supported 256")

        by_id: dict[int, VertexRecord] = {}
        for v in self._vertices:
            if v.id in by_id:
                prev = by_id[v.id]
                if prev.parent != v.parent:
                    raise MultipleParentsError(
                        f"vertex {v.id} ({v.name}) declared with parents "
                        f"{prev.parent} and {v.parent}")
                raise HierarchyError(f"vertex id {v.id} appears twice")
            by_id[v.id] = v
        if sorted(by_id) != list(range(n)):
            raise HierarchyError("vertex ids must be dense integers 0..|V|-1")

        for v in self._vertices:
            if not 0 <= v.level < self._level_count:
                raise HierarchyError(
                    f"vertex {v.id} ({v.name}) has level {v.level}, "
                    f"valid range is 0..{self._level_count - 1}")
            if v.parent is not None and v.parent not in by_id:
                raise DanglingParentError(
                    f"vertex {v.id} ({v.name}) references missing parent {v.parent}")

        # Cycle check on the raw parent relation, independent of levels.
        state = [0] * n  # 0 unvisited, 1 on current chain, 2 done
        for start in range(n):
            chain = []
            u = start
            while u != -1 and state[u] == 0:
                state[u] = 1
                chain.append(u)
                p = by_id[u].parent
                u = -1 if p is None else p
            if u != -1 and state[u] == 1:
                raise CycleDetectedError(f"parent chain through vertex {u} is cyclic")
            for c in chain:
                state[c] = 2

        for v in self._vertices:
            if v.parent is not None:
                p = by_id[v.parent]
                if p.level <= v.level:
                    raise LevelInversionError(
                        f"edge {p.id} ({p.name}, level {p.level}) -> "
                        f"{v.id} ({v.name}, level {v.level}) does not increase level")

        leaves = [v.id for v in self._vertices if v.level == 0]
        if not leaves:
            raise EmptyLeafSetError("hierarchy has no level-0 vertices")
        if sorted(leaves) != list(range(len(leaves))):
            raise HierarchyError(
                "leaf (level-0) vertices must occupy ids 0..|Y|-1 to match "
                "the class-id space of sample streams")

        # Vertices without a leaf descendant would carry zero generality.
        has_leaf = [v.level == 0 for v in self._vertices]
        for v in sorted(self._vertices, key=lambda r: r.level):
            if has_leaf[v.id] and v.parent is not None:
                has_leaf[v.parent] = True
        for v in self._vertices:
            if not has_leaf[v.id]:
                raise EmptyLeafSetError(
                    f"vertex {v.id} ({v.name}) has no leaf descendants")

        populated = {v.level for v in self._vertices}
        empty = sorted(set(range(self._level_count)) - populated)
        if empty:
            warnings.warn(f"hierarchy declares {self._level_count} levels but "
                          f"levels {empty} are empty", stacklevel=3)

    def _compute_generality(self) -> np.ndarray:
        g = np.zeros(len(self._vertices), dtype=np.int64)
        order = np.argsort(self._levels, kind="stable")
        for u in order:
            if self._levels[u] == 0:
                g[u] = 1
            p = self._parent[u]
            if p >= 0:
                g[p] += g[u]
        return g

    def _compute_ancestor_table(self) -> np.ndarray:
        """table[l, y] = ancestor of leaf y used when the pixel is assigned level l."""
        table = np.empty((self._level_count, self._leaf_count), dtype=np.int64)
        for y in range(self._leaf_count):
            u = y
            for lvl in range(self._level_count):
                p = self._parent[u]
                while p >= 0 and self._levels[p] <= lvl:
                    u = int(p)
                    p = self._parent[u]
                table[lvl, y] = u
        return table

    # -- accessors ------------------------------------------------------------

    @property
    def vertices(self) -> tuple[VertexRecord, ...]:
        return self._vertices

    @property
    def vertex_count(self) -> int:
        return len(self._vertices)

    @property
    def leaf_count(self) -> int:
        return self._leaf_count

    @property
    def level_count(self) -> int:
        return self._level_count

    @property
    def max_level(self) -> int:
        return self._level_count - 1

    def name(self, vertex: int) -> str:
        return self._vertices[vertex].name

    def level_of(self, vertex: int) -> int:
        return int(self._levels[vertex])

    def parent_of(self, vertex: int) -> int | None:
        p = int(self._parent[vertex])
        return None if p < 0 else p

    def vertices_at_level(self, level: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self._levels == level)]

    def generality(self, vertex: int) -> int:
        """Number of leaf descendants of ``vertex`` (1 for a leaf)."""
        if not 0 <= vertex < len(self._vertices):
            raise DomainError(f"vertex id {vertex} out of range")
        return int(self._generality[vertex])

    @property
    def generalities(self) -> np.ndarray:
        return self._generality

    def ancestor_at_level(self, leaf: int, level: int) -> int:
        """Map a leaf class to its ancestor at ``level``.

        Walks the parent chain upward and stops at the last vertex whose
        level does not exceed ``level``; a leaf with no parents maps to
        itself at every level, and ``ancestor_at_level(y, 0) == y`` always.
        """
        if not 0 <= leaf < self._leaf_count:
            raise DomainError(f"leaf id {leaf} out of range 0..{self._leaf_count - 1}")
        if not 0 <= level < self._level_count:
            raise DomainError(f"level {level} out of range 0..{self._level_count - 1}")
        return int(self._ancestors[level, leaf])

    @property
    def ancestor_table(self) -> np.ndarray:
        """(level_count, leaf_count) lookup behind :meth:`ancestor_at_level`."""
        return self._ancestors

    def leaf_descendants(self, vertex: int) -> np.ndarray:
        """Leaf ids reachable from ``vertex`` (itself, for a leaf)."""
        reach = np.zeros(self._leaf_count, dtype=bool)
        for y in range(self._leaf_count):
            u = y
            while u >= 0:
                if u == vertex:
                    reach[y] = True
                    break
                u = int(self._parent[u])
        return np.flatnonzero(reach)

    def __repr__(self) -> str:  # pragma: no cover
        return (f"HierarchyGraph(|V|={self.vertex_count}, |Y|={self.leaf_count}, "
                f"levels={self.level_count})")


def hierarchy_from_dict(doc: dict) -> HierarchyGraph:
    """Build and validate a hierarchy from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise HierarchyError("hierarchy document must be a JSON object")
    try:
        level_count = int(doc["levels"])
        raw_vertices = doc["vertices"]
    except KeyError as exc:
        raise HierarchyError(f"hierarchy document missing key {exc}") from None
    if not isinstance(raw_vertices, list):
        raise HierarchyError("'vertices' must be a list")

    vertices = []
    for entry in raw_vertices:
        try:
            parent = entry.get("parent")
            vertices.append(VertexRecord(
                id=int(entry["id"]),
                name=str(entry["name"]),
                level=int(entry["level"]),
                parent=None if parent is None else int(parent),
            ))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise HierarchyError(f"malformed vertex entry {entry!r}: {exc}") from None

    colors = {}
    for key, value in (doc.get("colors") or {}).items():
        try:
            colors[int(key)] = str(value)
        except (TypeError, ValueError):
            raise HierarchyError(f"color key {key!r} is not a vertex id") from None

    return HierarchyGraph(vertices, level_count, colors)


def load_hierarchy(path: str | Path) -> HierarchyGraph:
    """Load a hierarchy from a JSON file (schema: ``{levels, vertices, colors?}``)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise HierarchyError(f"{path}: not valid JSON ({exc})") from None
    return hierarchy_from_dict(doc)
