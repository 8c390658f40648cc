"""Summary quality metrics against clinician-style ground truth.

Temporal precision/recall follow the overlap convention used throughout
this pipeline's reporting: precision is |S intersect GT| / |GT| (how much
of the ground truth the summary covers) and recall is |S intersect GT| /
|S| (how much of the summary is ground truth).  Note this is the reverse
of the usual information-retrieval naming; it is kept as-is so reported
tables read consistently.

The feature-level variant scores similarity instead of exact frame
indices: frame features are reduced to 2 dimensions (deterministic
principal-component projection by default), every frame takes the maximum
cosine similarity against the ground-truth keyframe features, and a frame
counts as a true positive when it is selected and its similarity exceeds
the threshold (0.999 by default, strict).

All rates are percentages in [0, 100].  The reduction factor is the
percentage of frames removed by the summary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import DTYPE, cosine_similarity

DEFAULT_THRESHOLD = 0.999


@dataclass(frozen=True)
class EvalReport:
    """Metric bundle for one video (or a corpus average)."""

    temporal_precision: float
    temporal_recall: float
    temporal_f1: float
    feature_precision: float
    feature_recall: float
    feature_f1: float
    reduction: float
    tp: int = 0
    fp: int = 0
    fn: int = 0
    feature_threshold: float = DEFAULT_THRESHOLD
    reducer: str = "pca2"

    def rows(self):
        yield "temporal_precision", self.temporal_precision
        yield "temporal_recall", self.temporal_recall
        yield "temporal_f1", self.temporal_f1
        yield "feature_precision", self.feature_precision
        yield "feature_recall", self.feature_recall
        yield "feature_f1", self.feature_f1
        yield "reduction", self.reduction


def _as_mask(mask, n: int | None = None) -> np.ndarray:
    mask = np.asarray(mask).astype(bool)
    if mask.ndim != 1:
        raise ValueError(f"mask must be a vector, got shape {mask.shape}")
    if n is not None and mask.size != n:
        raise ValueError(f"mask length {mask.size} does not match {n}")
    return mask


def f1_score(p: float, r: float) -> float:
    return 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)


def temporal_prf(mask, gt) -> tuple[float, float, float]:
    """Temporal overlap metrics as percentages.

    Precision divides by |GT|, recall by |S| (recall is 0 for an empty
    summary).  An empty ground truth has no defined metrics.
    """
    mask = _as_mask(mask)
    gt = _as_mask(gt, mask.size)
    gt_count = int(gt.sum())
    if gt_count == 0:
        raise ValueError("ground truth selects no frames; temporal metrics undefined")
    overlap = int((mask & gt).sum())
    precision = 100.0 * overlap / gt_count
    sel_count = int(mask.sum())
    recall = 0.0 if sel_count == 0 else 100.0 * overlap / sel_count
    return precision, recall, f1_score(precision, recall)


def pca2(features: np.ndarray) -> np.ndarray:
    """Project frame features onto their top two principal components.

    Deterministic sign convention: each component's largest-magnitude
    loading is made positive.
    """
    features = np.asarray(features, dtype=DTYPE)
    if features.shape[0] < 2:
        raise ValueError("need at least 2 frames to reduce")
    centered = features - features.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2].copy()
    if comps.shape[0] < 2:  # single feature column; embed in 2-D
        comps = np.vstack([comps, np.zeros_like(comps)])
    for c in comps:
        j = int(np.argmax(np.abs(c)))
        if c[j] < 0:
            c *= -1.0
    return centered @ comps.T


def feature_prf(features: np.ndarray, mask, gt, threshold: float = DEFAULT_THRESHOLD,
                reducer: str = "pca2"):
    """Similarity-based precision/recall.

    Every frame is compared against all ground-truth keyframe features in
    the reduced space; its score is the maximum cosine similarity.  With
    S the summary set: tp = selected frames scoring strictly above the
    threshold, fp = the remaining selected frames, fn = unselected frames
    scoring above the threshold.  Returns (P, R, F1, (tp, fp, fn)).
    """
    features = np.asarray(features, dtype=DTYPE)
    mask = _as_mask(mask, features.shape[0])
    gt = _as_mask(gt, features.shape[0])
    if not gt.any():
        raise ValueError("ground truth selects no frames; feature metrics undefined")
    if reducer == "pca2":
        reduced = pca2(features)
    elif reducer == "none":
        reduced = features
    else:
        raise ValueError(f"unknown reducer {reducer!r}")

    gt_rows = reduced[gt]
    cos_best = np.array([
        max(cosine_similarity(row, g) for g in gt_rows) for row in reduced
    ])
    above = cos_best > threshold
    tp = int(np.sum(mask & above))
    fp = int(np.sum(mask & ~above))
    fn = int(np.sum(~mask & above))
    precision = 0.0 if tp + fp == 0 else 100.0 * tp / (tp + fp)
    recall = 0.0 if tp + fn == 0 else 100.0 * tp / (tp + fn)
    return precision, recall, f1_score(precision, recall), (tp, fp, fn)


def reduction_factor(mask) -> float:
    """Percentage of frames dropped: 100 * (1 - |S| / N)."""
    mask = _as_mask(mask)
    if mask.size == 0:
        raise ValueError("empty video")
    return 100.0 * (1.0 - float(mask.sum()) / mask.size)


def evaluate_video(features: np.ndarray, mask, gt,
                   threshold: float = DEFAULT_THRESHOLD,
                   reducer: str = "pca2") -> EvalReport:
    tp_, tr_, tf_ = temporal_prf(mask, gt)
    fp_, fr_, ff_, (tp, fp, fn) = feature_prf(features, mask, gt,
                                              threshold=threshold, reducer=reducer)
    return EvalReport(
        temporal_precision=tp_, temporal_recall=tr_, temporal_f1=tf_,
        feature_precision=fp_, feature_recall=fr_, feature_f1=ff_,
        reduction=reduction_factor(mask),
        tp=tp, fp=fp, fn=fn, feature_threshold=threshold, reducer=reducer,
    )


def corpus_report(reports: list[EvalReport]) -> EvalReport:
    """Unweighted arithmetic mean of every rate across videos."""
    if not reports:
        raise ValueError("no reports to average")
    mean = lambda attr: float(np.mean([getattr(r, attr) for r in reports]))
    return EvalReport(
        temporal_precision=mean("temporal_precision"),
        temporal_recall=mean("temporal_recall"),
        temporal_f1=mean("temporal_f1"),
        feature_precision=mean("feature_precision"),
        feature_recall=mean("feature_recall"),
        feature_f1=mean("feature_f1"),
        reduction=mean("reduction"),
        tp=sum(r.tp for r in reports),
        fp=sum(r.fp for r in reports),
        fn=sum(r.fn for r in reports),
        feature_threshold=reports[0].feature_threshold,
        reducer=reports[0].reducer,
    )


def seed_statistics(reports_per_seed: list[EvalReport]):
    """Mean and sample SD of each rate across independently trained models."""
    rows = {}
    for name, _ in reports_per_seed[0].rows():
        vals = np.array([dict(r.rows())[name] for r in reports_per_seed], dtype=DTYPE)
        sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        rows[name] = (float(vals.mean()), sd)
    return rows
