"""Certification pipelines: adaptive hierarchical certification, the flat
baseline, and fixed-level baselines, plus the HCR1 result file format.

All modes share one pipeline: draw n0 selection samples, assign each
component a hierarchy level and a candidate vertex, draw n fresh test
samples at the assigned granularity, run a one-sided binomial test per
component against the commitment threshold tau, and keep only components
whose p-value survives the Bonferroni familywise bound alpha.  The modes
differ solely in how levels are assigned:

* adaptive  - the threshold schedule picks a level from the component's
  top-two mean-posterior gap (small gap -> coarse level);
* flat      - every component stays at level 0;
* fixed     - every component is forced to one configured level.

The selection stage consumes its n0 samples in every mode so that runs in
different modes consume identical sample streams and stay comparable
draw-for-draw.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadMagicError, DomainError, HeaderMismatchError
from .hierarchy import HierarchyGraph
from .sampler import POSTERIORS, SampleSource, sample_posteriors, sample_vertex_counts
from .stats import binom_p_values, bonferroni_test, certified_radius
from .thresholds import ThresholdSchedule
from .validation import check_positive_int, check_probability

ABSTAIN = -1
_ABSTAIN_U32 = 0xFFFFFFFF

MODE_ADAPTIVE = "adaptive"
MODE_FLAT = "flat"
MODE_FIXED = "fixed"


@dataclass(frozen=True)
class CertificationConfig:
    """Run parameters; defaults follow the usual certification setup
    (sigma 0.25, tau 0.75, alpha 0.001, n 100, n0 10)."""

    sigma: float = 0.25
    tau: float = 0.75
    alpha: float = 0.001
    n: int = 100
    n0: int = 10
    thresholds: tuple = ()
    mode: str = MODE_ADAPTIVE
    level: int = 0
    level_rule: str = "finest"
    topclass_source: str = "counts"

    def __post_init__(self):
        check_probability(self.tau, "tau", low=0.5, inclusive=(False, False))
        check_probability(self.alpha, "alpha", inclusive=(False, False))
        if not self.sigma > 0:
            raise DomainError(f"sigma={self.sigma} must be positive")
        check_positive_int(self.n, "n")
        check_positive_int(self.n0, "n0")
        if self.mode not in (MODE_ADAPTIVE, MODE_FLAT, MODE_FIXED):
            raise DomainError(f"mode {self.mode!r} not one of adaptive|flat|fixed")
        if self.level_rule not in ("finest", "coarsest"):
            raise DomainError(f"level_rule {self.level_rule!r} not finest|coarsest")
        if self.topclass_source not in ("counts", "n0"):
            raise DomainError(f"topclass_source {self.topclass_source!r} not counts|n0")
        if self.mode == MODE_FIXED and self.level < 0:
            raise DomainError(f"fixed level {self.level} must be >= 0")
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))

    def to_dict(self) -> dict:
        return {
            "sigma": float(self.sigma), "tau": float(self.tau),
            "alpha": float(self.alpha), "n": int(self.n), "n0": int(self.n0),
            "thresholds": list(self.thresholds), "mode": self.mode,
            "level": int(self.level), "level_rule": self.level_rule,
            "topclass_source": self.topclass_source,
        }


@dataclass
class LevelAssignment:
    """Per-component level selection derived from the n0 selection samples."""

    levels: np.ndarray
    top_class: np.ndarray
    second_class: np.ndarray
    delta_p: np.ndarray
    basis: str           # "posteriors" or "label-frequency" fallback
    tie_count: int


@dataclass
class CertifiedSegmentation:
    """Per-component certification outcome plus the global radius."""

    result: np.ndarray     # vertex id, or ABSTAIN (-1)
    level: np.ndarray      # level each component was tested at
    p_value: np.ndarray
    radius: float
    config: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    candidate: np.ndarray | None = None        # pre-test candidate vertices
    candidate_count: np.ndarray | None = None  # test-sample hits on the candidate

    @property
    def component_count(self) -> int:
        return int(self.result.shape[0])

    @property
    def certified_mask(self) -> np.ndarray:
        return self.result != ABSTAIN

    @property
    def abstain_count(self) -> int:
        return int(np.sum(self.result == ABSTAIN))

    def level_shares(self) -> dict:
        """Percentage of components certified per level, plus the abstain share."""
        n = self.component_count
        shares = {}
        for lvl in np.unique(self.level[self.certified_mask]):
            hit = np.sum((self.level == lvl) & self.certified_mask)
            shares[int(lvl)] = 100.0 * float(hit) / n
        return {"certified_per_level": shares,
                "abstain": 100.0 * self.abstain_count / n}


def check_source_matches(source: SampleSource, hierarchy: HierarchyGraph) -> None:
    if int(source.class_count) != hierarchy.leaf_count:
        raise HeaderMismatchError(
            f"source emits {source.class_count} classes but the hierarchy "
            f"has {hierarchy.leaf_count} leaves")


def select_component_levels(source: SampleSource, hierarchy: HierarchyGraph,
                            config: CertificationConfig,
                            schedule: ThresholdSchedule | None = None) -> LevelAssignment:
    """Assign each component a hierarchy level from n0 selection samples.

    The mean of the n0 posterior frames gives per-component top-two classes
    and their gap; the schedule turns gaps into levels.  On a labels-only
    source the mean posterior is replaced by empirical class frequencies,
    which is flagged as the "label-frequency" basis in diagnostics.  These
    n0 samples are consumed here and never reused by the test stage.
    """
    check_source_matches(source, hierarchy)
    if POSTERIORS in source.capabilities:
        frames = sample_posteriors(source, config.n0)
        mean = frames.mean(axis=0)
        basis = "posteriors"
    else:
        labels = source.next_labels(config.n0)
        n_comp = int(source.component_count)
        offsets = np.arange(n_comp, dtype=np.int64) * hierarchy.leaf_count
        flat = np.bincount((labels + offsets[None, :]).ravel(),
                           minlength=n_comp * hierarchy.leaf_count)
        mean = flat.reshape(n_comp, hierarchy.leaf_count) / float(config.n0)
        basis = "label-frequency"

    if mean.shape[1] >= 2:
        order = np.argsort(-mean, axis=1, kind="stable")  # ties: lowest id first
        top = order[:, 0]
        second = order[:, 1]
        rows = np.arange(mean.shape[0])
        delta = mean[rows, top] - mean[rows, second]
        tie_count = int(np.sum(mean[rows, top] == mean[rows, second]))
    else:
        top = np.zeros(mean.shape[0], dtype=np.int64)
        second = np.full(mean.shape[0], -1, dtype=np.int64)
        delta = mean[:, 0].copy()
        tie_count = 0
    delta = np.clip(delta, 0.0, 1.0)

    if config.mode == MODE_ADAPTIVE:
        if schedule is None:
            schedule = ThresholdSchedule(config.thresholds, hierarchy.max_level,
                                         config.level_rule)
        levels = schedule.levels_for_gaps(delta)
    elif config.mode == MODE_FLAT:
        levels = np.zeros(mean.shape[0], dtype=np.int64)
    else:
        if config.level > hierarchy.max_level:
            raise DomainError(
                f"fixed level {config.level} exceeds hierarchy top level "
                f"{hierarchy.max_level}")
        levels = np.full(mean.shape[0], config.level, dtype=np.int64)

    return LevelAssignment(levels=levels, top_class=top.astype(np.int64),
                           second_class=second.astype(np.int64),
                           delta_p=delta, basis=basis, tie_count=tie_count)


def run_certification(source: SampleSource, hierarchy: HierarchyGraph,
                      config: CertificationConfig) -> CertifiedSegmentation:
    """Execute the certification pipeline configured by ``config.mode``."""
    check_source_matches(source, hierarchy)
    schedule = None
    if config.mode == MODE_ADAPTIVE:
        schedule = ThresholdSchedule(config.thresholds, hierarchy.max_level,
                                     config.level_rule)
    if config.mode == MODE_FIXED and config.level > hierarchy.max_level:
        raise DomainError(f"fixed level {config.level} exceeds hierarchy top "
                          f"level {hierarchy.max_level}")

    selection = select_component_levels(source, hierarchy, config, schedule)
    levels = selection.levels
    counts = sample_vertex_counts(source, hierarchy, levels, config.n)

    if config.mode == MODE_ADAPTIVE or config.topclass_source == "n0":
        candidates = hierarchy.ancestor_table[levels, selection.top_class]
        topclass_used = "n0"
    else:
        # faithful flat/fixed estimate: most frequent vertex in the test
        # counts themselves (argmax returns the lowest id on ties)
        candidates = np.argmax(counts, axis=1).astype(np.int64)
        topclass_used = "counts"

    rows = np.arange(counts.shape[0])
    hits = counts[rows, candidates]
    p_values = binom_p_values(hits, config.n, config.tau)
    reject = bonferroni_test(p_values, config.alpha)
    result = np.where(reject, candidates, np.int64(ABSTAIN))

    diagnostics = {
        "selection_basis": selection.basis,
        "selection_ties": selection.tie_count,
        "topclass_used": topclass_used,
        "schedule": schedule.describe() if schedule is not None else None,
    }
    return CertifiedSegmentation(
        result=result, level=levels, p_value=p_values,
        radius=certified_radius(config.sigma, config.tau),
        config=config.to_dict(), source=source.fingerprint(),
        diagnostics=diagnostics, candidate=candidates, candidate_count=hits)


def certify_adaptive(source, hierarchy, config: CertificationConfig) -> CertifiedSegmentation:
    return run_certification(source, hierarchy, replace(config, mode=MODE_ADAPTIVE))


def certify_flat(source, hierarchy, config: CertificationConfig) -> CertifiedSegmentation:
    return run_certification(source, hierarchy, replace(config, mode=MODE_FLAT))


def certify_at_level(source, hierarchy, config: CertificationConfig,
                     level: int) -> CertifiedSegmentation:
    return run_certification(
        source, hierarchy, replace(config, mode=MODE_FIXED, level=int(level)))


# --- HCR1 result files --------------------------------------------------------

_HCR_MAGIC = b"HCR1"
_RECORD = np.dtype([("vertex", "<u4"), ("level", "u1"), ("pvalue", "<f4")])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_certification(path, cert: CertifiedSegmentation) -> None:
    """Serialize to the HCR1 layout: magic, u32 N, u32 header length, a JSON
    header (config, seed, radius, abstain count, provenance), then one
    packed record per component (u32 vertex or 0xFFFFFFFF for abstain,
    u8 level, f32 p-value), all little-endian."""
    n = cert.component_count
    if cert.level.max(initial=0) > 0xFF:
        raise DomainError("levels beyond 255 do not fit the result record")
    header = {
        "abstain_count": cert.abstain_count,
        "config": _jsonable(cert.config),
        "diagnostics": _jsonable(cert.diagnostics),
        "radius": float(cert.radius),
        "seed": cert.source.get("seed", cert.source.get("producer_seed")),
        "source": _jsonable(cert.source),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    records = np.empty(n, dtype=_RECORD)
    records["vertex"] = np.where(cert.result == ABSTAIN,
                                 np.uint32(_ABSTAIN_U32),
                                 cert.result.astype(np.int64)).astype(np.uint32)
    records["level"] = cert.level.astype(np.uint8)
    records["pvalue"] = cert.p_value.astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(_HCR_MAGIC)
        fh.write(struct.pack("<II", n, len(blob)))
        fh.write(blob)
        fh.write(records.tobytes())


def read_certification(path) -> CertifiedSegmentation:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _HCR_MAGIC:
            raise BadMagicError(f"bad result magic {magic!r}")
        n, blob_len = struct.unpack("<II", fh.read(8))
        header = json.loads(fh.read(blob_len).decode())
        raw = fh.read(n * _RECORD.itemsize)
        if len(raw) < n * _RECORD.itemsize:
            raise BadMagicError("truncated result payload")
        records = np.frombuffer(raw, dtype=_RECORD)
    result = records["vertex"].astype(np.int64)
    result[result == _ABSTAIN_U32] = ABSTAIN
    return CertifiedSegmentation(
        result=result,
        level=records["level"].astype(np.int64),
        p_value=records["pvalue"].astype(np.float64),
        radius=float(header["radius"]),
        config=header.get("config", {}),
        source=header.get("source", {}),
        diagnostics=header.get("diagnostics", {}),
    )
