"""Frame and video data model plus the synthetic-video generator.

A frame is a 2-D float64 array of intensities in [0, 255] with both sides
at least 8 pixels; a video is a 3-D array (frames, height, width) holding
one or more frames of uniform size.  Videos load from a directory of
per-frame ``.vstf`` tensors or binary PGMs, ordered by the numeric value of
the file stem.

The synthetic generator builds small grayscale videos that mimic scan
structure: segments of a static background, a drifting horizontal band, or
bright vertical lines ("abnormal"), separated at configured boundaries.
It returns the video together with a ground-truth keyframe mask (a window
around every segment boundary plus every abnormal frame) and per-frame
classifier scores (near 0 for normal patterns, near 1 for abnormal ones).
All randomness comes from the seeded PCG64 stream, so a spec is a pure
function of its fields.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensorio
from .errors import DataError
from .numerics import DTYPE, make_rng

log = logging.getLogger(__name__)

MIN_SIDE = 8

PATTERN_UNIFORM = "uniform"
PATTERN_BAND = "moving-band"
PATTERN_LINES = "bright-vertical-lines"
PATTERNS = (PATTERN_UNIFORM, PATTERN_BAND, PATTERN_LINES)

#: patterns whose frames count as abnormal (classifier score near 1)
ABNORMAL_PATTERNS = frozenset({PATTERN_LINES})

SCORE_NOISE = 0.1  # classifier scores stay within 0.1 of their class label


def validate_video(video: np.ndarray) -> np.ndarray:
    video = np.asarray(video, dtype=DTYPE)
    if video.ndim != 3 or video.shape[0] == 0:
        raise ValueError(f"video must be a nonempty (N, H, W) array, got {video.shape}")
    if video.shape[1] < MIN_SIDE or video.shape[2] < MIN_SIDE:
        raise ValueError(f"frames must be at least {MIN_SIDE}x{MIN_SIDE}, got {video.shape[1:]}")
    if video.min() < 0 or video.max() > 255:
        raise ValueError("pixel intensities must lie in [0, 255]")
    return video


def _frame_files(directory: Path) -> list[Path]:
    vstf = sorted(directory.glob("*.vstf"))
    pgm = sorted(directory.glob("*.pgm"))
    files = vstf if vstf else pgm
    if not files:
        raise DataError(f"{directory}: no .vstf or .pgm frames found")

    def numeric_key(p: Path) -> int:
        try:
            return int(p.stem)
        except ValueError:
            raise DataError(f"{p}: frame file stem is not numeric") from None

    return sorted(files, key=numeric_key)


def load_video(path) -> np.ndarray:
    """Load a directory of per-frame files into an (N, H, W) array."""
    directory = Path(path)
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory")
    frames = []
    shape = None
    for f in _frame_files(directory):
        frame = tensorio.load_tensor(f) if f.suffix == ".vstf" else tensorio.load_pgm(f)
        if frame.ndim != 2:
            raise DataError(f"{f}: frame tensor must be rank 2, got rank {frame.ndim}")
        if shape is None:
            shape = frame.shape
        elif frame.shape != shape:
            raise DataError(f"{f}: frame shape {frame.shape} differs from first frame {shape}")
        frames.append(frame)
    return validate_video(np.stack(frames))


def save_video(video: np.ndarray, path, fmt: str = "vstf") -> None:
    """Write one file per frame, zero-padded numeric stems."""
    video = validate_video(video)
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(video):
        if fmt == "vstf":
            tensorio.save_tensor(directory / f"{i:06d}.vstf", frame)
        elif fmt == "pgm":
            tensorio.save_pgm(directory / f"{i:06d}.pgm", frame)
        else:
            raise ValueError(f"unknown frame format {fmt!r}")


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one deterministic synthetic video.

    ``boundaries`` are strictly increasing frame indices inside
    (0, frame_count); they split the video into ``len(boundaries) + 1``
    segments, one pattern id each.  ``seed`` fully determines the output.
    """

    frame_count: int
    height: int = 64
    width: int = 64
    boundaries: tuple[int, ...] = ()
    patterns: tuple[str, ...] = (PATTERN_UNIFORM,)
    noise_amplitude: float = 4.0
    seed: int = 0
    gt_window: int = 5

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValueError("frame_count must be positive")
        if self.height < MIN_SIDE or self.width < MIN_SIDE:
            raise ValueError(f"frame sides must be at least {MIN_SIDE}")
        if len(self.patterns) == 0:
            raise ValueError("degenerate spec: no segments")
        if len(self.patterns) != len(self.boundaries) + 1:
            raise ValueError(
                f"{len(self.boundaries)} boundaries require "
                f"{len(self.boundaries) + 1} patterns, got {len(self.patterns)}")
        for p in self.patterns:
            if p not in PATTERNS:
                raise ValueError(f"unknown pattern id {p!r}")
        prev = 0
        for b in self.boundaries:
            if not (0 < b < self.frame_count):
                raise ValueError(f"boundary {b} outside (0, {self.frame_count})")
            if b <= prev:
                raise ValueError("boundaries must be strictly increasing")
            prev = b
        if self.gt_window < 1 or self.gt_window % 2 == 0:
            raise ValueError("gt_window must be a positive odd width")

    def segments(self) -> list[tuple[int, int, str]]:
        """(start, end, pattern) triples covering [0, frame_count)."""
        edges = (0,) + self.boundaries + (self.frame_count,)
        return [(edges[i], edges[i + 1], self.patterns[i]) for i in range(len(self.patterns))]


def _render_segment(pattern: str, start: int, end: int, h: int, w: int,
                    rng: np.random.Generator) -> np.ndarray:
    n = end - start
    frames = np.full((n, h, w), 40.0, dtype=DTYPE)
    if pattern == PATTERN_UNIFORM:
        frames += rng.random() * 30.0  # per-segment background level
    elif pattern == PATTERN_BAND:
        band_h = max(2, h // 8)
        offset = int(rng.random() * h)
        for i in range(n):
            top = (offset + 2 * i) % (h - band_h)
            frames[i, top:top + band_h, :] = 220.0
    elif pattern == PATTERN_LINES:
        n_lines = 3 + int(rng.random() * 3)
        cols = np.unique((rng.random(n_lines) * (w - 2)).astype(int) + 1)
        frames[:, :, cols] = 230.0
        # faint horizontal pleura-like stripe at a fixed row
        row = h // 4
        frames[:, row, :] = np.maximum(frames[:, row, :], 180.0)
    else:  # pragma: no cover - validated by SyntheticSpec
        raise ValueError(f"unknown pattern id {pattern!r}")
    return frames


def generate_synthetic(spec: SyntheticSpec):
    """Render a synthetic video with ground truth and classifier scores.

    Returns ``(video, ground_truth, scores)``.  Pixels pass through float32
    so saved tensors round-trip bit-identically.  Ground truth marks a
    ``gt_window``-wide window centered on every boundary plus every frame of
    an abnormal-pattern segment.  Scores sit within ``SCORE_NOISE`` of the
    segment's class label (0 normal, 1 abnormal), clamped to [0, 1].
    """
    rng = make_rng(spec.seed)
    n, h, w = spec.frame_count, spec.height, spec.width
    video = np.empty((n, h, w), dtype=DTYPE)
    gt = np.zeros(n, dtype=bool)
    scores = np.empty(n, dtype=DTYPE)

    for start, end, pattern in spec.segments():
        video[start:end] = _render_segment(pattern, start, end, h, w, rng)
        label = 1.0 if pattern in ABNORMAL_PATTERNS else 0.0
        noise = rng.random(end - start) * SCORE_NOISE
        seg_scores = label - noise if label == 1.0 else label + noise
        scores[start:end] = np.clip(seg_scores, 0.0, 1.0)
        if label == 1.0:
            gt[start:end] = True

    # Boundary transition zones: blend the adjacent renders and triple the
    # noise, so transitions are structurally unlike either segment (the SSIM
    # signal dips there, as probe movement makes it dip in a real scan).
    half = spec.gt_window // 2
    for b in spec.boundaries:
        lo, hi = max(0, b - half), min(n, b + half + 1)
        blend = 0.5 * (video[max(lo - 1, 0)] + video[min(hi, n - 1)])
        video[lo:hi] = 0.5 * video[lo:hi] + 0.5 * blend
        video[lo:hi] += rng.uniform(-3.0 * spec.noise_amplitude,
                                    3.0 * spec.noise_amplitude, size=(hi - lo, h, w))

    video += rng.uniform(-spec.noise_amplitude, spec.noise_amplitude, size=video.shape)
    np.clip(video, 0.0, 255.0, out=video)
    video = video.astype(np.float32).astype(DTYPE)

    half = spec.gt_window // 2
    for b in spec.boundaries:
        gt[max(0, b - half):min(n, b + half + 1)] = True
    return video, gt, scores.astype(np.float32).astype(DTYPE)


def corpus_specs(count: int, frame_count: int = 100, height: int = 64, width: int = 64,
                 noise_amplitude: float = 4.0, seed: int = 0,
                 gt_window: int = 5) -> list[SyntheticSpec]:
    """Recipes for a verification corpus of three-segment videos.

    Each video holds one abnormal bright-line segment (12-18% of the
    frames) at a seed-dependent position between two normal segments, so
    ground truth stays small relative to the video and classifier scores
    carry a clean signal.
    """
    if count < 1:
        raise ValueError("corpus needs at least one video")
    specs = []
    for i in range(count):
        r = make_rng(seed, 2, i)
        ab_len = max(5, int(round(frame_count * (0.12 + 0.06 * r.random()))))
        start = int(frame_count * (0.25 + 0.35 * r.random()))
        start = min(max(1, start), frame_count - ab_len - 1)
        normals = (PATTERN_UNIFORM, PATTERN_BAND) if i % 2 == 0 else (PATTERN_BAND, PATTERN_UNIFORM)
        video_seed = int(np.random.SeedSequence([seed, 3, i]).generate_state(1)[0])
        specs.append(SyntheticSpec(
            frame_count=frame_count, height=height, width=width,
            boundaries=(start, start + ab_len),
            patterns=(normals[0], PATTERN_LINES, normals[1]),
            noise_amplitude=noise_amplitude, seed=video_seed, gt_window=gt_window))
    return specs
