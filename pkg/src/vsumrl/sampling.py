"""Samplers that turn frame probabilities into summary masks.

Training draws stochastic masks: SBS runs one Bernoulli trial per frame;
SAB averages probabilities over 5-frame moving windows (stride 1, so n
frames give n - 5 + 1 segments), runs one trial per segment, and selects
the union of accepted windows.  Inference is deterministic: T25 keeps the
top 25% of frames by probability, T15S the union of the top 15% of
segments by windowed average.  Quotas round up; ties break toward the
lower frame/segment index.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .numerics import DTYPE
from .policy import PROB_CLAMP

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 5
T25_FRACTION = 0.25
T15S_FRACTION = 0.15


def _check_probs(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=DTYPE)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"probabilities must be a nonempty vector, got {p.shape}")
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def sample_sbs(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli trial per frame."""
    p = _check_probs(p)
    return rng.random(p.shape) < p


def segment_average(p: np.ndarray, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Moving-average probabilities over stride-1 windows.

    Returns n - window + 1 averages.  A video shorter than the window falls
    back to a single whole-video segment (logged).
    """
    p = _check_probs(p)
    n = p.size
    if window < 1:
        raise ValueError("window must be positive")
    if n < window:
        log.warning("video of %d frames shorter than window %d; using one segment", n, window)
        return np.array([p.mean()], dtype=DTYPE)
    sw = np.lib.stride_tricks.sliding_window_view(p, window)
    return sw.mean(axis=1)


def _segment_span(index: int, window: int, n: int) -> tuple[int, int]:
    if n < window:
        return 0, n
    return index, index + window


def segments_to_mask(accepted, window: int, n: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    for s in np.flatnonzero(np.asarray(accepted, dtype=bool)):
        lo, hi = _segment_span(int(s), window, n)
        mask[lo:hi] = True
    return mask


def sample_sab_decisions(p: np.ndarray, window: int, rng: np.random.Generator):
    """One Bernoulli trial per segment average; returns (mask, decisions).

    The decisions vector is the actual sampled action sequence and is what
    the segment-level log-likelihood factorizes over.
    """
    p = _check_probs(p)
    averages = segment_average(p, window)
    decisions = rng.random(averages.shape) < averages
    return segments_to_mask(decisions, window, p.size), decisions


def sample_sab(p: np.ndarray, window: int, rng: np.random.Generator) -> np.ndarray:
    """Segment-average Bernoulli sampling: union of accepted windows."""
    mask, _ = sample_sab_decisions(p, window, rng)
    return mask


def _top_indices(values: np.ndarray, count: int) -> np.ndarray:
    # stable sort on the negated values keeps ties in ascending index order
    order = np.argsort(-values, kind="stable")
    return order[:count]


def infer_t25(p: np.ndarray) -> np.ndarray:
    """Deterministic summary: the ceil(0.25 n) most probable frames."""
    p = _check_probs(p)
    n = p.size
    quota = math.ceil(T25_FRACTION * n)
    mask = np.zeros(n, dtype=bool)
    mask[_top_indices(p, quota)] = True
    return mask


def infer_t15s(p: np.ndarray, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Deterministic summary: union of the top ceil(0.15 m) segments."""
    p = _check_probs(p)
    averages = segment_average(p, window)
    quota = math.ceil(T15S_FRACTION * averages.size)
    accepted = np.zeros(averages.size, dtype=bool)
    accepted[_top_indices(averages, quota)] = True
    return segments_to_mask(accepted, window, p.size)


# ---------------------------------------------------------------------------
# log-likelihoods of sampled actions


def log_prob(mask: np.ndarray, p: np.ndarray) -> float:
    """Log-likelihood of a mask under per-frame Bernoulli sampling."""
    p = _check_probs(p)
    a = np.asarray(mask, dtype=DTYPE)
    return float(np.sum(a * np.log(p) + (1.0 - a) * np.log1p(-p)))


def log_prob_grad(mask: np.ndarray, p: np.ndarray) -> np.ndarray:
    """d log_prob / d p, elementwise a/p - (1-a)/(1-p)."""
    p = _check_probs(p)
    a = np.asarray(mask, dtype=DTYPE)
    return a / p - (1.0 - a) / (1.0 - p)


def sab_log_prob(decisions: np.ndarray, p: np.ndarray, window: int) -> float:
    """Log-likelihood of segment decisions under segment-average trials."""
    p = _check_probs(p)
    q = segment_average(p, window)
    b = np.asarray(decisions, dtype=DTYPE)
    if b.shape != q.shape:
        raise ValueError(f"{b.size} decisions for {q.size} segments")
    return float(np.sum(b * np.log(q) + (1.0 - b) * np.log1p(-q)))


def sab_log_prob_grad(decisions: np.ndarray, p: np.ndarray, window: int) -> np.ndarray:
    """d(sab_log_prob)/dp: each frame collects 1/len terms from its windows."""
    p = _check_probs(p)
    n = p.size
    q = segment_average(p, window)
    b = np.asarray(decisions, dtype=DTYPE)
    if b.shape != q.shape:
        raise ValueError(f"{b.size} decisions for {q.size} segments")
    dq = b / q - (1.0 - b) / (1.0 - q)
    grad = np.zeros(n, dtype=DTYPE)
    for s in range(q.size):
        lo, hi = _segment_span(s, window, n)
        grad[lo:hi] += dq[s] / (hi - lo)
    return grad
