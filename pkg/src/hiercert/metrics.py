"""Evaluation of certified segmentations.

Certified information gain (CIG) scores a correctly certified component by
how specific its vertex is: ``(log|Y| - log G(v)) / log|Y|`` with ``G`` the
number of leaf descendants, so a correct leaf scores 1, a correct coarse
vertex scores less, and abstentions or wrong vertices score 0.  On a
single-level hierarchy every vertex is a leaf and CIG reduces to certified
accuracy.

Components whose ground-truth label equals the ignore sentinel are excluded
from every numerator and denominator in this module.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .certify import ABSTAIN, CertifiedSegmentation
from .errors import DimMismatchError, DomainError, HierarchyError
from .hierarchy import HierarchyGraph


@dataclass
class GroundTruth:
    """Reference leaf labels; ``ignore`` marks unlabeled components."""

    labels: np.ndarray
    ignore: int | None = None
    height: int | None = None
    width: int | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels).reshape(-1).astype(np.int64)
        if self.height is not None and self.width is not None:
            if self.height * self.width != self.labels.size:
                raise DimMismatchError(
                    f"{self.height}x{self.width} grid cannot hold "
                    f"{self.labels.size} labels")

    @property
    def component_count(self) -> int:
        return int(self.labels.size)

    @property
    def valid_mask(self) -> np.ndarray:
        if self.ignore is None:
            return np.ones(self.labels.size, dtype=bool)
        return self.labels != self.ignore

    def grid(self) -> np.ndarray:
        if self.height is None or self.width is None:
            raise DimMismatchError("ground truth carries no grid dimensions")
        return self.labels.reshape(self.height, self.width)


def _check_dims(cert: CertifiedSegmentation, gt: GroundTruth) -> None:
    if cert.component_count != gt.component_count:
        raise DimMismatchError(
            f"result has {cert.component_count} components, "
            f"ground truth has {gt.component_count}")


def cig_contributions(cert: CertifiedSegmentation, gt: GroundTruth,
                      hierarchy: HierarchyGraph) -> np.ndarray:
    """Per-component CIG contribution in [0, 1] (0 on ignore components)."""
    _check_dims(cert, gt)
    valid = gt.valid_mask
    safe_gt = np.where(valid, gt.labels, 0)
    if safe_gt.size and (safe_gt.min() < 0 or safe_gt.max() >= hierarchy.leaf_count):
        raise DomainError("ground-truth labels outside the leaf id range")
    if cert.result.size and cert.result.max() >= hierarchy.vertex_count:
        raise DomainError(
            f"result contains vertex id {cert.result.max()} but the "
            f"hierarchy has only {hierarchy.vertex_count} vertices")
    if cert.level.size and (cert.level.min() < 0
                            or cert.level.max() >= hierarchy.level_count):
        raise DomainError("result levels outside the hierarchy's level range")
    expected = hierarchy.ancestor_table[cert.level, safe_gt]
    correct = valid & (cert.result != ABSTAIN) & (cert.result == expected)

    out = np.zeros(cert.component_count, dtype=np.float64)
    if hierarchy.leaf_count == 1:
        out[correct] = 1.0
        return out
    log_y = math.log(hierarchy.leaf_count)
    gen = hierarchy.generalities[np.where(correct, cert.result, 0)]
    out[correct] = (log_y - np.log(gen[correct])) / log_y
    return out


def cig(cert: CertifiedSegmentation, gt: GroundTruth,
        hierarchy: HierarchyGraph) -> float:
    """Mean CIG over non-ignore components."""
    contrib = cig_contributions(cert, gt, hierarchy)
    n_valid = int(gt.valid_mask.sum())
    if n_valid == 0:
        return 0.0
    return float(contrib.sum() / n_valid)


def per_class_cig(cert: CertifiedSegmentation, gt: GroundTruth,
                  hierarchy: HierarchyGraph, class_id: int) -> float:
    """Mean CIG contribution over the components whose ground truth is
    ``class_id``; 0 when the class is absent."""
    contrib = cig_contributions(cert, gt, hierarchy)
    members = gt.valid_mask & (gt.labels == class_id)
    if not members.any():
        return 0.0
    return float(contrib[members].mean())


def present_classes(gt: GroundTruth) -> np.ndarray:
    return np.unique(gt.labels[gt.valid_mask])


def c_cig(cert: CertifiedSegmentation, gt: GroundTruth,
          hierarchy: HierarchyGraph, denominator: str = "present") -> float:
    """Class-averaged CIG.

    ``denominator="present"`` averages over the classes that occur in the
    ground truth; ``"all"`` divides by the full leaf count, with absent
    classes contributing zero.
    """
    if denominator not in ("present", "all"):
        raise DomainError(f"denominator {denominator!r} not present|all")
    contrib = cig_contributions(cert, gt, hierarchy)
    classes = present_classes(gt)
    if classes.size == 0:
        return 0.0
    scores = [float(contrib[gt.valid_mask & (gt.labels == a)].mean())
              for a in classes]
    divisor = hierarchy.leaf_count if denominator == "all" else len(scores)
    return float(sum(scores) / divisor)


def abstain_rate(cert: CertifiedSegmentation, gt: GroundTruth | None = None) -> float:
    """Percentage of abstain components (over non-ignore components when a
    ground truth is supplied)."""
    abst = cert.result == ABSTAIN
    if gt is None:
        return 100.0 * float(abst.mean())
    _check_dims(cert, gt)
    valid = gt.valid_mask
    n_valid = int(valid.sum())
    if n_valid == 0:
        return 0.0
    return 100.0 * float(abst[valid].sum()) / n_valid


def class_abstain_rate(cert: CertifiedSegmentation, gt: GroundTruth) -> float:
    """Mean of per-class abstain percentages over classes present in gt."""
    _check_dims(cert, gt)
    abst = cert.result == ABSTAIN
    rates = []
    for a in present_classes(gt):
        members = gt.valid_mask & (gt.labels == a)
        rates.append(100.0 * float(abst[members].mean()))
    return float(np.mean(rates)) if rates else 0.0


def boundary_map(labels: np.ndarray, margin: int = 10) -> np.ndarray:
    """Mark components lying within ``margin`` of a label transition.

    A component is boundary when any component within Chebyshev distance
    ``max(margin, 1)`` carries a different label, i.e. where the
    morphological dilation and erosion of the label grid disagree.  With
    margin 0 the window degenerates to 3x3 and only components adjacent to
    a differing label are marked.  Windows are clipped at the image edge.
    """
    grid = np.asarray(labels)
    if grid.ndim != 2:
        raise DimMismatchError(f"boundary_map needs a 2-D grid, got {grid.shape}")
    if margin < 0:
        raise DomainError(f"margin={margin} must be >= 0")
    size = 2 * max(int(margin), 1) + 1
    hi = ndimage.maximum_filter(grid, size=size, mode="nearest")
    lo = ndimage.minimum_filter(grid, size=size, mode="nearest")
    return hi != lo


def stratified_metrics(cert: CertifiedSegmentation, gt: GroundTruth,
                       hierarchy: HierarchyGraph, mask: np.ndarray) -> dict:
    """Abstain rate and CIG restricted to a mask and to its complement.

    Empty strata report ``None``.  The two strata partition the non-ignore
    components, so their counts always sum to the global valid count.
    """
    mask = np.asarray(mask).reshape(-1).astype(bool)
    if mask.size != cert.component_count:
        raise DimMismatchError(
            f"mask has {mask.size} entries, result has {cert.component_count}")
    _check_dims(cert, gt)
    contrib = cig_contributions(cert, gt, hierarchy)
    abst = cert.result == ABSTAIN
    valid = gt.valid_mask

    def one(stratum: np.ndarray) -> dict:
        sel = stratum & valid
        count = int(sel.sum())
        if count == 0:
            return {"components": 0, "abstain_rate": None, "cig": None}
        return {
            "components": count,
            "abstain_rate": 100.0 * float(abst[sel].sum()) / count,
            "cig": float(contrib[sel].sum() / count),
        }

    return {"boundary": one(mask), "non_boundary": one(~mask)}


def miou(pred: np.ndarray, gt: GroundTruth) -> float:
    """Mean intersection-over-union across classes present in the ground
    truth; prediction entries outside the leaf range never match."""
    pred = np.asarray(pred).reshape(-1)
    if pred.size != gt.component_count:
        raise DimMismatchError(
            f"prediction has {pred.size} entries, ground truth {gt.component_count}")
    valid = gt.valid_mask
    ious = []
    for a in present_classes(gt):
        p = (pred == a) & valid
        g = (gt.labels == a) & valid
        union = int((p | g).sum())
        inter = int((p & g).sum())
        ious.append(inter / union if union else 0.0)
    return float(np.mean(ious)) if ious else 0.0


# --- full report ---------------------------------------------------------------

@dataclass
class MetricsReport:
    cig: float
    c_cig: float
    abstain_rate: float
    class_abstain_rate: float
    miou: float
    per_class: dict
    boundary: dict | None
    flags: dict

    def to_dict(self) -> dict:
        return {
            "cig": self.cig, "c_cig": self.c_cig,
            "abstain_rate": self.abstain_rate,
            "class_abstain_rate": self.class_abstain_rate,
            "miou": self.miou, "per_class": self.per_class,
            "boundary": self.boundary, "flags": self.flags,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def evaluate(cert: CertifiedSegmentation, gt: GroundTruth,
             hierarchy: HierarchyGraph, margin: int = 10,
             ccig_denominator: str = "present") -> MetricsReport:
    """Assemble the full evaluation report for one certified segmentation."""
    _check_dims(cert, gt)
    contrib = cig_contributions(cert, gt, hierarchy)
    abst = cert.result == ABSTAIN
    valid = gt.valid_mask

    per_class = {}
    scores = []
    for a in present_classes(gt):
        members = valid & (gt.labels == a)
        count = int(members.sum())
        score = float(contrib[members].mean())
        scores.append(score)
        per_class[int(a)] = {
            "name": hierarchy.name(int(a)),
            "cig": score,
            "certified_rate": 100.0 * float((~abst[members]).mean()),
            "abstain_rate": 100.0 * float(abst[members].mean()),
            "components": count,
        }
    divisor = hierarchy.leaf_count if ccig_denominator == "all" else max(len(scores), 1)
    ccig_value = float(sum(scores) / divisor) if scores else 0.0

    boundary = None
    if gt.height is not None and gt.width is not None:
        mask = boundary_map(gt.grid(), margin)
        boundary = stratified_metrics(cert, gt, hierarchy, mask.reshape(-1))
        boundary["margin"] = int(margin)

    # mIoU over the leaf-certified prediction; coarse vertices and abstains miss
    pred = np.where(cert.result < hierarchy.leaf_count, cert.result, -2)

    return MetricsReport(
        cig=float(contrib.sum() / max(int(valid.sum()), 1)),
        c_cig=ccig_value,
        abstain_rate=abstain_rate(cert, gt),
        class_abstain_rate=class_abstain_rate(cert, gt),
        miou=miou(pred, gt),
        per_class=per_class,
        boundary=boundary,
        flags={
            "ccig_denominator": ccig_denominator,
            "ignore_excluded": True,
            "selection_basis": cert.diagnostics.get("selection_basis"),
            "topclass_used": cert.diagnostics.get("topclass_used"),
        },
    )


# --- ground-truth files ---------------------------------------------------------

def write_ground_truth(path, labels: np.ndarray, ignore: int | None = None) -> None:
    """Write a raw little-endian u16 grid plus its JSON sidecar."""
    grid = np.asarray(labels)
    if grid.ndim != 2:
        raise DimMismatchError("ground truth must be written as a 2-D grid")
    if grid.min() < 0 or grid.max() > np.iinfo(np.uint16).max:
        raise DomainError("labels do not fit in u16")
    path = Path(path)
    path.write_bytes(grid.astype("<u2").tobytes())
    sidecar = {"height": int(grid.shape[0]), "width": int(grid.shape[1]),
               "ignore": None if ignore is None else int(ignore)}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True))


def _load_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise HierarchyError(f"{path}: only binary (P5) PGM is supported")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos] in b" \t\r\n":
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in b" \t\r\n":
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    dtype = ">u2" if maxval > 255 else "u1"
    grid = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return grid.reshape(height, width).astype(np.int64)


def load_ground_truth(path) -> GroundTruth:
    """Load ground truth from a PGM (P5) file or a raw u16 grid.

    A JSON sidecar at ``<path>.json`` supplies ``height``/``width`` (raw
    grids only) and the ``ignore`` sentinel; PGM files may omit it.
    """
    path = Path(path)
    sidecar_path = Path(str(path) + ".json")
    sidecar = {}
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text())
    if path.suffix.lower() == ".pgm":
        grid = _load_pgm(path)
        return GroundTruth(grid.reshape(-1), ignore=sidecar.get("ignore"),
                           height=grid.shape[0], width=grid.shape[1])
    if not sidecar:
        raise DimMismatchError(f"raw grid {path} needs a sidecar {sidecar_path}")
    height, width = int(sidecar["height"]), int(sidecar["width"])
    raw = np.frombuffer(path.read_bytes(), dtype="<u2", count=height * width)
    return GroundTruth(raw.astype(np.int64), ignore=sidecar.get("ignore"),
                       height=height, width=width)
