"""IoU instance matching, precision/recall/F1 and the CycleGAN loss terms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MatchResult",
    "Scores",
    "LossConfig",
    "iou",
    "iou_matrix",
    "match_instances",
    "prf_scores",
    "pool_matches",
    "mean_scores",
    "cycle_loss",
    "adversarial_loss_terms",
]

LOG_CLAMP = 1e-7


@dataclass(frozen=True)
class MatchResult:
    tau: float
    matches: tuple = ()  # (pred_label, gt_label, iou)
    tp: int = 0
    fp: int = 0
    fn: int = 0


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class LossConfig:
    """Cycle-consistency weights: `lambda_g` for the mask->image generator."""

    lambda_g: float = 10.0
    lambda_f: float = 15.0

    def __post_init__(self):
        if self.lambda_g < 0 or self.lambda_f < 0:
            raise ValueError("loss weights must be non-negative")


def iou(a, b):
    """Intersection over union of two boolean pixel masks (0 when both are empty)."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def _labels(mask):
    return np.asarray(getattr(mask, "labels", mask))


def iou_matrix(pred, gt):
    """IoU of every (pred, gt) instance pair, shape ``(K_pred, K_gt)``.

    Row ``p - 1`` corresponds to pred label p, column ``g - 1`` to gt label g.
    """
    p = _labels(pred).ravel().astype(np.int64)
    g = _labels(gt).ravel().astype(np.int64)
    if p.shape != g.shape:
        raise ValueError("pred and gt masks differ in shape")
    kp, kg = int(p.max(initial=0)), int(g.max(initial=0))
    joint = np.bincount(p * (kg + 1) + g, minlength=(kp + 1) * (kg + 1)).reshape(kp + 1, kg + 1)
    inter = joint[1:, 1:]
    area_p = joint.sum(axis=1)[1:, None]
    area_g = joint.sum(axis=0)[None, 1:]
    union = area_p + area_g - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / np.maximum(union, 1), 0.0)
    return out


def match_instances(pred, gt, tau=0.5):
    """One-to-one matching of predicted to ground-truth instances at IoU >= tau.

    For ``tau >= 0.5`` an instance can reach the threshold with at most one
    disjoint counterpart (the only exception is an exact 0.5 tie where one
    instance is the union of two equal halves, and then the halves have no
    other candidate). Greedy matching in descending IoU order, ties by
    ``(pred, gt)`` label, is therefore optimal in match count and total IoU.
    """
    if not 0.5 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0.5, 1], got {tau}")
    ious = iou_matrix(pred, gt)
    kp, kg = ious.shape
    pi, gi = np.nonzero(ious >= tau)
    vals = ious[pi, gi]
    _check_unambiguous(pi, gi)
    order = np.lexsort((gi, pi, -vals))
    used_p, used_g = set(), set()
    matches = []
    for k in order:
        p, g = int(pi[k]), int(gi[k])
        if p in used_p or g in used_g:
            continue
        used_p.add(p)
        used_g.add(g)
        matches.append((p + 1, g + 1, float(vals[k])))
    tp = len(matches)
    return MatchResult(float(tau), tuple(matches), tp, kp - tp, kg - tp)


def _check_unambiguous(pi, gi):
    # Every candidate component must be a star: a node with several partners
    # is only allowed if each of those partners has no other candidate.
    deg_p = np.bincount(pi) if pi.size else np.zeros(0, int)
    deg_g = np.bincount(gi) if gi.size else np.zeros(0, int)
    for p, g in zip(pi, gi):
        if deg_p[p] > 1 and deg_g[g] > 1:
            raise AssertionError("ambiguous IoU candidate graph; tau >= 0.5 uniqueness violated")


def prf_scores(m):
    """Precision, recall and F1 of a match result, with 0/0 taken as 0."""
    return _scores(m.tp, m.fp, m.fn)


def _scores(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Scores(precision, recall, f1)


def pool_matches(results):
    """Dataset-level scores from summed tp/fp/fn counts."""
    tp = sum(r.tp for r in results)
    fp = sum(r.fp for r in results)
    fn = sum(r.fn for r in results)
    return _scores(tp, fp, fn)


def mean_scores(results):
    """Image-level mean of precision, recall and F1."""
    scores = [prf_scores(r) for r in results]
    if not scores:
        return Scores(0.0, 0.0, 0.0)
    return Scores(*(float(np.mean([getattr(s, k) for s in scores]))
                    for k in ("precision", "recall", "f1")))


def cycle_loss(original, cycled):
    """Mean absolute difference between an image and its round-trip."""
    a = np.asarray(getattr(original, "values", original), dtype=np.float64)
    b = np.asarray(getattr(cycled, "values", cycled), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


def adversarial_loss_terms(d_real, d_fake):
    """``log D(y) + log(1 - D(G(x)))`` with probabilities clamped to ``[1e-7, 1]``.

    Array inputs are treated as a batch and the per-sample terms averaged.
    """
    d_real = np.asarray(d_real, dtype=np.float64)
    d_fake = np.asarray(d_fake, dtype=np.float64)
    terms = (np.log(np.clip(d_real, LOG_CLAMP, 1.0))
             + np.log(np.clip(1.0 - d_fake, LOG_CLAMP, 1.0)))
    return float(np.mean(terms))
