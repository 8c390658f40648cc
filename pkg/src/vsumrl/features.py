"""Per-frame feature streams feeding the fusion block.

A stream is one encoder's output: an (N, f) matrix with one feature vector
per frame (f defaults to 512).  Streams arrive either from precomputed
tensor files (deep encoders run elsewhere) or from the cheap built-in frame
encoders here.  An ensemble is K streams aligned over the same frames and
sharing the same width.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensorio
from .errors import DataError
from .numerics import DTYPE

DEFAULT_WIDTH = 512
BUILTIN_KINDS = ("downsample", "histogram")

_DOWNSAMPLE_GRID = 16  # built-in downsample encoder resizes frames to 16x16
_HIST_BINS = 64


@dataclass(frozen=True)
class FeatureStream:
    encoder_name: str
    features: np.ndarray  # (N, f) float64

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=DTYPE)
        if feats.ndim != 2:
            raise ValueError(f"feature stream must be (N, f), got {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValueError(f"stream {self.encoder_name!r} contains non-finite values")
        object.__setattr__(self, "features", feats)

    @property
    def frame_count(self) -> int:
        return self.features.shape[0]

    @property
    def width(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class FeatureEnsemble:
    """K aligned streams, same frame count and width."""

    streams: tuple[FeatureStream, ...]

    def __post_init__(self):
        streams = tuple(self.streams)
        if len(streams) < 1:
            raise ValueError("ensemble needs at least one stream")
        n, f = streams[0].frame_count, streams[0].width
        for s in streams[1:]:
            if s.frame_count != n or s.width != f:
                raise DataError(
                    f"stream {s.encoder_name!r} is {s.frame_count}x{s.width}, "
                    f"expected {n}x{f}")
        object.__setattr__(self, "streams", streams)

    @property
    def frame_count(self) -> int:
        return self.streams[0].frame_count

    @property
    def width(self) -> int:
        return self.streams[0].width

    def stack(self) -> np.ndarray:
        """(N, K, f) array with one row of encoder vectors per frame."""
        return np.stack([s.features for s in self.streams], axis=1)


def _project_width(features: np.ndarray, width: int) -> np.ndarray:
    """Zero-pad or truncate the feature axis to ``width``."""
    n, f = features.shape
    if f == width:
        return features
    if f > width:
        return features[:, :width]
    out = np.zeros((n, width), dtype=DTYPE)
    out[:, :f] = features
    return out


def load_stream(path, expected_frames: int, name: str | None = None,
                width: int | None = None) -> FeatureStream:
    """Load a rank-2 tensor file as a feature stream.

    Row count must equal ``expected_frames``.  If ``width`` is given the
    feature axis is zero-padded or truncated to match.
    """
    arr = tensorio.load_tensor(path)
    if arr.ndim != 2:
        raise DataError(f"{path}: feature tensor must be rank 2, got rank {arr.ndim}")
    if arr.shape[0] != expected_frames:
        raise DataError(
            f"{path}: {arr.shape[0]} feature rows do not align with "
            f"{expected_frames} video frames")
    if width is not None:
        arr = _project_width(arr, width)
    return FeatureStream(name or Path(path).stem, arr)


def save_stream(stream: FeatureStream, path) -> None:
    tensorio.save_tensor(path, stream.features)


def _bilinear_resize(frame: np.ndarray, grid: int) -> np.ndarray:
    """Resize a frame to grid x grid sampling corner-aligned positions."""
    h, w = frame.shape
    ys = np.linspace(0.0, h - 1.0, grid)
    xs = np.linspace(0.0, w - 1.0, grid)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = frame[np.ix_(y0, x0)] * (1 - wx) + frame[np.ix_(y0, x1)] * wx
    bot = frame[np.ix_(y1, x0)] * (1 - wx) + frame[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


def encode_builtin(video: np.ndarray, kind: str, width: int = DEFAULT_WIDTH) -> FeatureStream:
    """Cheap deterministic frame encoders.

    ``downsample``: bilinear resize of each frame to a fixed 16x16 grid,
    flattened and zero-padded/truncated to ``width``.  ``histogram``: 64-bin
    intensity histogram (fraction of pixels per bin) tiled to ``width``.
    """
    video = np.asarray(video, dtype=DTYPE)
    if video.ndim != 3:
        raise ValueError(f"video must be (N, H, W), got {video.shape}")
    n = video.shape[0]
    if kind == "downsample":
        rows = np.stack([_bilinear_resize(f, _DOWNSAMPLE_GRID).ravel() for f in video])
    elif kind == "histogram":
        bins = np.clip((video.reshape(n, -1) // 4).astype(int), 0, _HIST_BINS - 1)
        counts = np.stack([np.bincount(b, minlength=_HIST_BINS) for b in bins])
        rows = counts.astype(DTYPE) / video.shape[1] / video.shape[2]
        reps = -(-width // _HIST_BINS)
        rows = np.tile(rows, (1, reps))
    else:
        raise ValueError(f"unknown built-in encoder {kind!r}")
    return FeatureStream(kind, _project_width(rows, width))


def mix_segmentation_features(image_stream: FeatureStream, mask_stream: FeatureStream,
                              image_weight: float = 0.7,
                              mask_weight: float = 0.3) -> FeatureStream:
    """Blend encoder features of a frame with those of its predicted mask.

    Elementwise image_weight * image + mask_weight * mask, defaults 0.7/0.3 so
    the noisier mask features reinforce rather than dominate.
    """
    if (image_stream.frame_count != mask_stream.frame_count
            or image_stream.width != mask_stream.width):
        raise DataError(
            f"misaligned streams: {image_stream.encoder_name!r} "
            f"{image_stream.features.shape} vs {mask_stream.encoder_name!r} "
            f"{mask_stream.features.shape}")
    mixed = image_weight * image_stream.features + mask_weight * mask_stream.features
    return FeatureStream(image_stream.encoder_name, mixed)


def normalize(stream: FeatureStream) -> FeatureStream:
    """Scale every frame vector to unit L2 norm; zero rows stay zero."""
    norms = np.linalg.norm(stream.features, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return FeatureStream(stream.encoder_name, stream.features / safe)
