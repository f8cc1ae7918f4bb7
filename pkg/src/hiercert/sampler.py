"""Monte-Carlo sample sources and the sampling operations built on them.

A source emits frames in a fixed order; one frame is one joint model
evaluation under a fresh noise draw, either a label map (one leaf id per
component) or a posterior map (one distribution over leaf classes per
component).  Selection samples and test samples are taken sequentially
from the same source and therefore never share a noise realization.

Randomness is counter-based (Philox 4x64-10 via numpy) so that equal seeds
replay bit-identically on any platform.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import (
    DomainError,
    InsufficientSamplesError,
    LabelOutOfRangeError,
    UnsupportedCapabilityError,
)
from .hierarchy import HierarchyGraph
from .validation import check_positive_int, check_row_stochastic

LABELS = "labels"
POSTERIORS = "posteriors"


def make_generator(seed: int) -> np.random.Generator:
    """Seeded counter-based generator (Philox 4x64-10)."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


class SampleSource:
    """Sequential stream of Monte-Carlo samples from a smoothed model.

    Subclasses set ``component_count``, ``class_count`` and ``capabilities``
    and implement the frame readers.  A source is a single-consumer stream;
    it is not safe to share across threads without external serialization.
    """

    component_count: int
    class_count: int
    capabilities: frozenset

    def next_posteriors(self, count: int) -> np.ndarray:
        """Return ``count`` posterior frames, shape (count, N, classes)."""
        raise UnsupportedCapabilityError(
            f"{type(self).__name__} cannot emit posterior samples")

    def next_labels(self, count: int) -> np.ndarray:
        """Return ``count`` label frames, shape (count, N), dtype int64."""
        raise UnsupportedCapabilityError(
            f"{type(self).__name__} cannot emit label samples")

    def fingerprint(self) -> dict:
        return {"kind": type(self).__name__,
                "component_count": int(self.component_count),
                "class_count": int(self.class_count)}

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class SyntheticModel(SampleSource):
    """Categorical model with known per-component class probabilities.

    The distribution at each component is the exact push-forward of the
    base model under the configured input noise, so the smoothed model's
    true class probabilities are known and guarantee statements can be
    checked against ground truth.  Posterior frames are the distributions
    themselves (noise-free); label frames are categorical draws.
    """

    capabilities = frozenset({LABELS, POSTERIORS})

    def __init__(self, distributions, seed: int = 0):
        dists = check_row_stochastic(np.atleast_2d(distributions), "distributions")
        if dists.ndim != 2:
            raise DomainError("distributions must be a 2-D (components x classes) array")
        self.distributions = dists / dists.sum(axis=1, keepdims=True)
        self.component_count = int(dists.shape[0])
        self.class_count = int(dists.shape[1])
        self.seed = int(seed)
        self._rng = make_generator(self.seed)
        cum = np.cumsum(self.distributions, axis=1)
        cum[:, -1] = 1.0
        self._cum = cum

    def next_posteriors(self, count: int) -> np.ndarray:
        count = check_positive_int(count, "count")
        return np.broadcast_to(
            self.distributions, (count, self.component_count, self.class_count)
        ).copy()

    def next_labels(self, count: int) -> np.ndarray:
        count = check_positive_int(count, "count")
        u = self._rng.random((count, self.component_count))
        # inverse-CDF draw; zero-probability classes are never selected
        return (u[:, :, None] >= self._cum[None, :, :]).sum(axis=2, dtype=np.int64)

    def fingerprint(self) -> dict:
        fp = super().fingerprint()
        fp["seed"] = self.seed
        fp["digest"] = hashlib.sha256(self.distributions.tobytes()).hexdigest()[:16]
        return fp


class InMemorySource(SampleSource):
    """Replay pre-materialized frames; handy for tests and shared-sample runs."""

    def __init__(self, posterior_frames=None, label_frames=None, class_count=None):
        caps = set()
        self._posteriors = None
        self._labels = None
        if posterior_frames is not None:
            self._posteriors = np.asarray(posterior_frames, dtype=np.float64)
            caps.add(POSTERIORS)
            caps.add(LABELS)
            self.component_count = self._posteriors.shape[1]
            self.class_count = self._posteriors.shape[2]
        if label_frames is not None:
            self._labels = np.asarray(label_frames, dtype=np.int64)
            caps.add(LABELS)
            self.component_count = self._labels.shape[1]
            if class_count is None and POSTERIORS not in caps:
                raise DomainError("class_count required for a labels-only source")
            if class_count is not None:
                self.class_count = int(class_count)
        if not caps:
            raise DomainError("need posterior_frames or label_frames")
        self.capabilities = frozenset(caps)
        self._pos_cursor = 0
        self._lab_cursor = 0

    def next_posteriors(self, count: int) -> np.ndarray:
        if self._posteriors is None:
            return super().next_posteriors(count)
        end = self._pos_cursor + count
        if end > self._posteriors.shape[0]:
            raise InsufficientSamplesError(
                f"requested {count} posterior frames, "
                f"{self._posteriors.shape[0] - self._pos_cursor} left")
        out = self._posteriors[self._pos_cursor:end]
        self._pos_cursor = end
        return out

    def next_labels(self, count: int) -> np.ndarray:
        if self._labels is None:
            # derive hard labels from posterior frames (argmax, lowest id wins ties)
            return np.argmax(self.next_posteriors(count), axis=2).astype(np.int64)
        end = self._lab_cursor + count
        if end > self._labels.shape[0]:
            raise InsufficientSamplesError(
                f"requested {count} label frames, "
                f"{self._labels.shape[0] - self._lab_cursor} left")
        out = self._labels[self._lab_cursor:end]
        self._lab_cursor = end
        return out


# --- sampling operations -----------------------------------------------------

def sample_posteriors(source: SampleSource, n0: int) -> np.ndarray:
    """Draw the n0 selection posteriors, shape (n0, N, classes)."""
    n0 = check_positive_int(n0, "n0")
    if POSTERIORS not in source.capabilities:
        raise UnsupportedCapabilityError(
            "source is labels-only; posterior sampling unavailable")
    frames = source.next_posteriors(n0)
    return check_row_stochastic(frames, "posterior frames")


def sample_vertex_counts(source: SampleSource, hierarchy: HierarchyGraph,
                         levels, n: int) -> np.ndarray:
    """Accumulate per-component vertex frequencies from n fresh label samples.

    Each sampled leaf label is lifted to the ancestor at the component's
    assigned hierarchy level before counting, so the returned (N, |V|)
    table holds, per component, how often each vertex was the smoothed
    model's answer at that component's granularity.  Column sums equal n.
    """
    n = check_positive_int(n, "n")
    if LABELS not in source.capabilities:
        raise UnsupportedCapabilityError("source cannot emit label samples")
    levels = np.asarray(levels, dtype=np.int64)
    n_comp = int(source.component_count)
    if levels.shape != (n_comp,):
        raise DomainError(f"levels must have shape ({n_comp},), got {levels.shape}")
    if levels.size and (levels.min() < 0 or levels.max() >= hierarchy.level_count):
        raise DomainError("levels outside 0..L")

    table = hierarchy.ancestor_table
    n_vert = hierarchy.vertex_count
    counts = np.zeros(n_comp * n_vert, dtype=np.int64)
    offsets = np.arange(n_comp, dtype=np.int64) * n_vert

    chunk = max(1, 2_000_000 // max(1, n_comp))
    done = 0
    while done < n:
        take = min(chunk, n - done)
        labels = source.next_labels(take)
        if labels.shape != (take, n_comp):
            raise DomainError(f"label frame shape {labels.shape} != ({take}, {n_comp})")
        if labels.min() < 0 or labels.max() >= hierarchy.leaf_count:
            raise LabelOutOfRangeError(
                f"label outside 0..{hierarchy.leaf_count - 1} in sample stream")
        mapped = table[levels[None, :], labels]
        counts += np.bincount((mapped + offsets[None, :]).ravel(),
                              minlength=n_comp * n_vert)
        done += take
    return counts.reshape(n_comp, n_vert)
