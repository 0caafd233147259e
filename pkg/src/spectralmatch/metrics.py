"""Correspondence quality measures.

R1 is a region-overlap score over predicted and ground-truth boxes in both
images; FPR is its false-positive companion over the same denominator. R2 is
the fraction of ground-truth keypoint pairs reproduced within a correspondence
error ``tau``; MAE is the mean target-point error.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from spectralmatch.errors import InputError


@dataclass(frozen=True)
class RegionBox:
    """Axis-aligned pixel box; covers columns x..x+w-1 and rows y..y+h-1."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise InputError("box extent must be positive")

    @property
    def area(self) -> int:
        return self.w * self.h

    def check_bounds(self, width: int, height: int):
        if self.x < 0 or self.y < 0 or self.x + self.w > width or self.y + self.h > height:
            raise InputError(f"box {self} outside {width}x{height} image")

    def intersection(self, other: "RegionBox") -> int:
        dx = min(self.x + self.w, other.x + other.w) - max(self.x, other.x)
        dy = min(self.y + self.h, other.y + other.h) - max(self.y, other.y)
        return max(dx, 0) * max(dy, 0)


@dataclass
class GroundTruth:
    pairs: np.ndarray  # (n, 4): x1 y1 x2 y2
    homography: object = None
    difficulty: str = None
    source: str = field(default="", repr=False)

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=np.float64).reshape(-1, 4)
        if p.shape[0] < 1:
            raise InputError("ground truth needs at least one pair")
        self.pairs = p

    @property
    def src(self):
        return self.pairs[:, :2]

    @property
    def dst(self):
        return self.pairs[:, 2:]


def overlap_counts(pred_a, pred_b, gt_a, gt_b):
    """Pixel counts (TP, TN, FP) summed over both images.

    Either image's boxes may be ``None`` to leave that image out.
    """
    tp = tn = fp = 0
    for pred, gt in ((pred_a, gt_a), (pred_b, gt_b)):
        if pred is None and gt is None:
            continue
        if pred is None or gt is None:
            raise InputError("prediction and ground-truth boxes must be given together")
        inter = pred.intersection(gt)
        tp += inter
        tn += gt.area - inter
        fp += pred.area - inter
    return tp, tn, fp


def overlap_shares(pred_a, pred_b, gt_a, gt_b):
    """Exact (TP, TN, FP) shares of the common denominator as fractions.

    The three shares sum to exactly 1 whenever any pixel is involved; with
    no pixels at all every share is 0.
    """
    tp, tn, fp = overlap_counts(pred_a, pred_b, gt_a, gt_b)
    total = tp + tn + fp
    if total == 0:
        return Fraction(0), Fraction(0), Fraction(0)
    return Fraction(tp, total), Fraction(tn, total), Fraction(fp, total)


def relevance_r1(pred_a, pred_b, gt_a, gt_b) -> float:
    return float(overlap_shares(pred_a, pred_b, gt_a, gt_b)[0])


def fpr_rate(pred_a, pred_b, gt_a, gt_b) -> float:
    """FP share FP/(TP+TN+FP): an invented companion to R1, not a published formula."""
    return float(overlap_shares(pred_a, pred_b, gt_a, gt_b)[2])


def mean_relevance(scores) -> float:
    scores = list(scores)
    if not scores:
        raise InputError("no relevance scores to average")
    return float(np.mean(scores))


def _pred_arrays(pred, selected_only):
    src = np.asarray(pred.source, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(pred.target, dtype=np.float64).reshape(-1, 2)
    if selected_only:
        keep = np.asarray(pred.selected, dtype=bool)
        src, dst = src[keep], dst[keep]
    return src, dst


def _nearest(p_i, p_j, src, dst, candidates):
    """Candidate with nearest source, then nearest target, then lowest index."""
    ds = np.linalg.norm(src[candidates] - p_i, axis=1)
    dt = np.linalg.norm(dst[candidates] - p_j, axis=1)
    order = np.lexsort((candidates, dt, ds))
    return candidates[order[0]]


def correspondence_errors(gt: GroundTruth, pred, theta: float = 5.0, selected_only: bool = False):
    """Correspondence error per ground-truth pair; ``inf`` where no prediction is in range."""
    src, dst = _pred_arrays(pred, selected_only)
    out = np.full(len(gt.pairs), np.inf)
    if len(src) == 0:
        return out
    for k, (p_i, p_j) in enumerate(zip(gt.src, gt.dst)):
        near = np.flatnonzero(np.linalg.norm(src - p_i, axis=1) <= theta)
        if near.size == 0:
            continue
        c = _nearest(p_i, p_j, src, dst, near)
        out[k] = 0.5 * np.sqrt(np.sum((p_i - src[c]) ** 2) + np.sum((p_j - dst[c]) ** 2))
    return out


def correspondence_r2(gt: GroundTruth, pred, tau: float, theta: float = 5.0,
                      selected_only: bool = False) -> float:
    delta = correspondence_errors(gt, pred, theta, selected_only)
    return float(np.mean(delta <= tau))


def mae(gt: GroundTruth, pred, image_diag: float, selected_only: bool = False) -> float:
    """Mean distance between ground-truth targets and the targets predicted for
    the nearest predicted source; ``image_diag`` per pair when nothing is predicted."""
    src, dst = _pred_arrays(pred, selected_only)
    if len(src) == 0:
        return float(image_diag)
    everything = np.arange(len(src))
    errs = []
    for p_i, p_j in zip(gt.src, gt.dst):
        c = _nearest(p_i, p_j, src, dst, everything)
        errs.append(np.linalg.norm(p_j - dst[c]))
    return float(np.mean(errs))
