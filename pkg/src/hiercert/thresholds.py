"""Threshold schedule mapping a component's top-two posterior gap to the
finest hierarchy level it may be certified at.

A schedule is a strictly descending tuple ``t_0 > t_1 > ... > t_{T-1}`` in
[0, 1]; a component with gap ``g`` is assigned the smallest level ``l``
with ``t_l < g`` (large gap -> fine level).  When no threshold qualifies
the component falls back to the coarsest configured level, ``min(T, L)``
for a hierarchy with top level ``L``, so levels past the configured range
stay reachable only through the fallback.

Published schedules are often written coarse-to-fine (ascending) and may
repeat values; ingestion accepts either orientation and canonicalizes:
ascending tuples are reversed, duplicate values are collapsed onto the
finest level that carries them, and the applied remap is recorded.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, NonDescendingThresholdsError


class ThresholdSchedule:
    """Canonicalized threshold schedule bound to a hierarchy depth."""

    def __init__(self, thresholds, max_level: int, rule: str = "finest"):
        if rule not in ("finest", "coarsest"):
            raise DomainError(f"rule must be 'finest' or 'coarsest', got {rule!r}")
        self.rule = rule
        self.max_level = int(max_level)
        if self.max_level < 0:
            raise DomainError("max_level must be >= 0")

        raw = tuple(float(t) for t in thresholds)
        for t in raw:
            if not 0.0 <= t <= 1.0:
                raise DomainError(f"threshold {t} outside [0, 1]")
        if len(raw) > self.max_level:
            raise DomainError(
                f"{len(raw)} thresholds configured but the hierarchy only has "
                f"levels 0..{self.max_level}")
        self.raw = raw

        descending = all(raw[i] >= raw[i + 1] for i in range(len(raw) - 1))
        ascending = all(raw[i] <= raw[i + 1] for i in range(len(raw) - 1))
        if descending:
            oriented = raw
            self.orientation = "descending"
        elif ascending:
            oriented = raw[::-1]
            self.orientation = "reversed"
        else:
            raise NonDescendingThresholdsError(
                f"thresholds {raw} are neither descending nor ascending")

        values: list[float] = []
        levels: list[int] = []
        for idx, t in enumerate(oriented):
            if values and t == values[-1]:
                continue  # duplicate collapses onto the finer (earlier) level
            values.append(t)
            levels.append(idx)
        self.values = np.asarray(values, dtype=np.float64)
        self.level_of_rank = np.asarray(levels, dtype=np.int64)
        self.fallback_level = min(len(oriented), self.max_level)
        self.level_remap = {int(r): int(l) for r, l in enumerate(levels)}

    def describe(self) -> dict:
        return {
            "raw": list(self.raw),
            "orientation": self.orientation,
            "canonical": [float(v) for v in self.values],
            "rank_levels": [int(l) for l in self.level_of_rank],
            "fallback_level": int(self.fallback_level),
            "rule": self.rule,
        }

    def level_for_gap(self, gap: float) -> int:
        """Hierarchy level for one top-two posterior gap."""
        return int(self.levels_for_gaps(np.asarray([gap], dtype=np.float64))[0])

    def levels_for_gaps(self, gaps) -> np.ndarray:
        gaps = np.asarray(gaps, dtype=np.float64)
        if gaps.size and (gaps.min() < -1e-12 or gaps.max() > 1.0 + 1e-12):
            raise DomainError("gaps must lie in [0, 1]")
        out = np.full(gaps.shape, self.fallback_level, dtype=np.int64)
        if self.values.size == 0:
            return out
        if self.rule == "finest":
            # first rank whose threshold lies strictly below the gap
            neg = -self.values  # strictly ascending
            ranks = np.searchsorted(neg, -gaps, side="right")
            hit = ranks < self.values.size
            out[hit] = self.level_of_rank[ranks[hit]]
        else:
            # literal smallest-threshold reading: any qualifying gap lands on
            # the coarsest configured rank
            hit = gaps > self.values[-1]
            out[hit] = self.level_of_rank[-1]
        return out
