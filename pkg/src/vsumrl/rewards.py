"""Reward terms scoring a candidate summary, and the SSIM signal pipeline.

Four components, each normalized to [0, 1]:

* representativeness: exp(-mean over all frames of the distance to the
  nearest selected frame), so summaries that cover the video score high;
* diversity: mean pairwise cosine dissimilarity of selected frames, with
  pairs more than 20 frames apart counted as maximally diverse;
* classifier bias: mean abnormality score of the selected frames;
* transition coverage: mean normalized SSIM-signal dissimilarity of the
  selected frames, rewarding selections at structural transitions.

The SSIM signal comes from the pairwise structural-similarity matrix of
the raw frames: row sums collapse the matrix to one value per frame, a
sliding least-squares slope localizes transitions, and thresholding the
absolute slope at its mean marks candidate keyframes.

The total reward is a weighted sum; the default weighting favors the
classifier term 2/3 with 1/9 for each remaining term.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ConfigError
from .numerics import DTYPE

log = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * 255.0) ** 2
SSIM_C2 = (0.03 * 255.0) ** 2

DEFAULT_SLOPE_WINDOW = 10
DEFAULT_DIVERSITY_SPAN = 20  # frames; beyond this pairs count as fully diverse


# ---------------------------------------------------------------------------
# structural similarity


def _gaussian_kernel(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    offsets = np.arange(size, dtype=DTYPE) - (size - 1) / 2.0
    k = np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


_KERNEL = _gaussian_kernel()


def _window_mean(images: np.ndarray) -> np.ndarray:
    """Gaussian-weighted local mean over the trailing two axes.

    Borders are mirrored without repeating the edge pixel (reflective
    padding), so the output has the input's shape.
    """
    out = correlate1d(images, _KERNEL, axis=-1, mode="mirror")
    return correlate1d(out, _KERNEL, axis=-2, mode="mirror")


def compute_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM between two frames (11x11 Gaussian window, sigma 1.5).

    Uses the standard stabilizers C1=(0.01*255)^2 and C2=(0.03*255)^2 for
    the [0, 255] intensity range; symmetric in its arguments.
    """
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    mu_a = _window_mean(a)
    mu_b = _window_mean(b)
    var_a = _window_mean(a * a) - mu_a * mu_a
    var_b = _window_mean(b * b) - mu_b * mu_b
    cov = _window_mean(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def ssim_matrix(video: np.ndarray) -> np.ndarray:
    """Pairwise SSIM of all frames, exploiting symmetry.

    Only the n(n-1)/2 upper-triangle pairs are computed (batched one row at
    a time); the diagonal is exactly 1.
    """
    video = np.asarray(video, dtype=DTYPE)
    n = video.shape[0]
    mu = _window_mean(video)
    var = _window_mean(video * video) - mu * mu
    matrix = np.eye(n, dtype=DTYPE)
    for i in range(n - 1):
        rest = video[i + 1:]
        cov = _window_mean(video[i] * rest) - mu[i] * mu[i + 1:]
        num = (2.0 * mu[i] * mu[i + 1:] + SSIM_C1) * (2.0 * cov + SSIM_C2)
        den = (mu[i] ** 2 + mu[i + 1:] ** 2 + SSIM_C1) * (var[i] + var[i + 1:] + SSIM_C2)
        vals = np.mean(num / den, axis=(1, 2))
        matrix[i, i + 1:] = vals
        matrix[i + 1:, i] = vals
    return matrix


@dataclass(frozen=True)
class SsimSignal:
    """Collapsed SSIM statistics of one video.

    ``sig`` holds row sums of the pairwise matrix, ``slope`` the sliding
    least-squares slope of sig (tail-padded to frame count by repeating the
    last window's slope), and ``keyframe_mask`` flags frames whose absolute
    slope exceeds the mean absolute slope.
    """

    matrix: np.ndarray
    sig: np.ndarray
    slope: np.ndarray
    keyframe_mask: np.ndarray


def _sliding_slopes(sig: np.ndarray, window: int) -> np.ndarray:
    n = sig.size
    if n < window:
        log.warning("signal of %d frames shorter than slope window %d; using one window",
                    n, window)
        window = n
    x = np.arange(window, dtype=DTYPE)
    xc = x - x.mean()
    denom = float(np.sum(xc * xc))
    if denom == 0.0:  # window of one frame
        return np.zeros(n, dtype=DTYPE)
    coeffs = xc / denom
    windows = np.lib.stride_tricks.sliding_window_view(sig, window)
    slopes = windows @ coeffs
    pad = np.full(n - slopes.size, slopes[-1], dtype=DTYPE)
    return np.concatenate([slopes, pad])


def ssim_pipeline(video: np.ndarray, slope_window: int = DEFAULT_SLOPE_WINDOW) -> SsimSignal:
    """Full signal pipeline: matrix, row-sum collapse, slopes, keyframes."""
    matrix = ssim_matrix(video)
    sig = matrix.sum(axis=1)
    slope = _sliding_slopes(sig, slope_window)
    magnitude = np.abs(slope)
    keyframe_mask = magnitude > magnitude.mean()
    return SsimSignal(matrix=matrix, sig=sig, slope=slope, keyframe_mask=keyframe_mask)


def normalized_dissimilarity(sig: np.ndarray, literal: bool = False) -> np.ndarray:
    """Min-max map of the collapsed signal to [0, 1].

    By default low signal values (frames unlike the rest, i.e. transitions)
    map to 1; ``literal=True`` keeps the raw orientation where high signal
    values score high.  A flat signal maps to all zeros.
    """
    sig = np.asarray(sig, dtype=DTYPE)
    lo, hi = float(sig.min()), float(sig.max())
    if hi - lo <= 0.0:
        return np.zeros_like(sig)
    if literal:
        return (sig - lo) / (hi - lo)
    return (hi - sig) / (hi - lo)


# ---------------------------------------------------------------------------
# reward components


def _mask_indices(mask: np.ndarray, n: int) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != (n,):
        raise ValueError(f"mask length {mask.shape} does not match {n} frames")
    return np.flatnonzero(mask)


def reward_rep(features: np.ndarray, mask: np.ndarray) -> float:
    """Representativeness: exp(-mean nearest-selected-frame distance)."""
    features = np.asarray(features, dtype=DTYPE)
    sel = _mask_indices(mask, features.shape[0])
    if sel.size == 0:
        return 0.0
    diffs = features[:, None, :] - features[None, sel, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=-1))
    return float(np.exp(-dists.min(axis=1).mean()))


def reward_div(features: np.ndarray, mask: np.ndarray,
               span: int = DEFAULT_DIVERSITY_SPAN) -> float:
    """Diversity: mean pairwise dissimilarity of the selected frames.

    Dissimilarity of a pair within ``span`` frames is 1 - cosine similarity
    (clipped to [0, 1] so anti-aligned features do not push the component
    out of range); pairs further apart count as 1.  Fewer than two selected
    frames score 0.
    """
    features = np.asarray(features, dtype=DTYPE)
    sel = _mask_indices(mask, features.shape[0])
    m = sel.size
    if m < 2:
        log.debug("diversity undefined for %d selected frames; scoring 0", m)
        return 0.0
    x = features[sel]
    norms = np.linalg.norm(x, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    cos = np.clip((x @ x.T) / np.outer(safe, safe), -1.0, 1.0)
    zero = norms == 0.0
    one_zero = zero[:, None] ^ zero[None, :]
    both_zero = zero[:, None] & zero[None, :]
    cos = np.where(one_zero, 0.0, np.where(both_zero, 1.0, cos))
    d = np.clip(1.0 - cos, 0.0, 1.0)
    far = np.abs(sel[:, None] - sel[None, :]) > span
    d = np.where(far, 1.0, d)
    np.fill_diagonal(d, 0.0)
    return float(d.sum() / (m * (m - 1)))


def reward_clsf(scores: np.ndarray, mask: np.ndarray) -> float:
    """Classifier bias: mean abnormality score over selected frames."""
    scores = np.asarray(scores, dtype=DTYPE)
    sel = _mask_indices(mask, scores.size)
    if sel.size == 0:
        return 0.0
    return float(scores[sel].mean())


def reward_ssim(signal: SsimSignal, mask: np.ndarray, literal: bool = False) -> float:
    """Transition coverage: mean normalized signal value over the summary."""
    sig_norm = normalized_dissimilarity(signal.sig, literal=literal)
    sel = _mask_indices(mask, sig_norm.size)
    if sel.size == 0:
        return 0.0
    return float(sig_norm[sel].mean())


# ---------------------------------------------------------------------------
# combination


@dataclass(frozen=True)
class RewardWeights:
    """Weights of the four components; must sum to 1."""

    clsf: float = 2.0 / 3.0
    ssim: float = 1.0 / 9.0
    rep: float = 1.0 / 9.0
    div: float = 1.0 / 9.0

    def __post_init__(self):
        total = self.clsf + self.ssim + self.rep + self.div
        if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise ConfigError(f"reward weights sum to {total!r}, expected 1")


#: named weighting presets; "full" is the default four-term mix, the pair
#: presets drop the other two terms for ablation runs.
WEIGHT_PRESETS = {
    "full": RewardWeights(),
    "clsf-ssim": RewardWeights(clsf=2.0 / 3.0, ssim=1.0 / 3.0, rep=0.0, div=0.0),
    "rep-div": RewardWeights(clsf=0.0, ssim=0.0, rep=0.5, div=0.5),
}


@dataclass(frozen=True)
class RewardBreakdown:
    r_rep: float
    r_div: float
    r_clsf: float
    r_ssim: float
    r_total: float


def reward_total(r_rep: float, r_div: float, r_clsf: float, r_ssim: float,
                 weights: RewardWeights = WEIGHT_PRESETS["full"]) -> RewardBreakdown:
    total = (weights.clsf * r_clsf + weights.ssim * r_ssim
             + weights.rep * r_rep + weights.div * r_div)
    return RewardBreakdown(r_rep=r_rep, r_div=r_div, r_clsf=r_clsf,
                           r_ssim=r_ssim, r_total=total)


def summary_reward(features: np.ndarray, scores: np.ndarray, signal: SsimSignal,
                   mask: np.ndarray, weights: RewardWeights = WEIGHT_PRESETS["full"],
                   span: int = DEFAULT_DIVERSITY_SPAN,
                   literal_ssim: bool = False) -> RewardBreakdown:
    """All four components plus the weighted total for one mask."""
    return reward_total(
        r_rep=reward_rep(features, mask),
        r_div=reward_div(features, mask, span=span),
        r_clsf=reward_clsf(scores, mask),
        r_ssim=reward_ssim(signal, mask, literal=literal_ssim),
        weights=weights,
    )
