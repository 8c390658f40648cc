"""Dataset directory layout and corpus loading.

Layout per video under the dataset root:

    <video_id>/frames/              per-frame .vstf (or .pgm) files
    <video_id>/features/<name>.vstf one tensor per encoder
    <video_id>/scores.vstf          per-frame classifier scores
    <video_id>/gt.vstf              optional ground-truth mask (0/1)

Feature files win when present; a missing file whose encoder name is a
built-in kind is computed from the raw frames instead.  Streams are
normalized to unit frame vectors before fusion.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import features, frames, rewards, tensorio
from .errors import DataError
from .features import FeatureEnsemble, FeatureStream
from .rewards import SsimSignal


@dataclass
class VideoBundle:
    """Everything the trainer and evaluator need for one video."""

    video_id: str
    ensemble: FeatureEnsemble
    scores: np.ndarray
    signal: SsimSignal | None = None
    gt: np.ndarray | None = None
    video: np.ndarray | None = None

    def __post_init__(self):
        self.stack = self.ensemble.stack()

    @property
    def frame_count(self) -> int:
        return self.ensemble.frame_count


def list_video_ids(data_dir) -> list[str]:
    root = Path(data_dir)
    if not root.is_dir():
        raise DataError(f"{root}: dataset directory does not exist")
    ids = sorted(d.name for d in root.iterdir() if d.is_dir())
    if not ids:
        raise DataError(f"{root}: dataset contains no videos")
    return ids


def _load_stream(video_dir: Path, name: str, video, width: int) -> FeatureStream:
    n = video.shape[0]
    path = video_dir / "features" / f"{name}.vstf"
    if path.exists():
        return features.load_stream(path, n, name=name, width=width)
    if name in features.BUILTIN_KINDS:
        return features.encode_builtin(video, name, width=width)
    raise DataError(f"{video_dir.name}: no feature file for encoder {name!r}")


def load_bundle(data_dir, video_id: str, encoders, width: int,
                slope_window: int = rewards.DEFAULT_SLOPE_WINDOW,
                need_signal: bool = True, keep_video: bool = False) -> VideoBundle:
    video_dir = Path(data_dir) / video_id
    video = frames.load_video(video_dir / "frames")
    n = video.shape[0]

    streams = tuple(features.normalize(_load_stream(video_dir, name, video, width))
                    for name in encoders)
    ensemble = FeatureEnsemble(streams)

    scores_path = video_dir / "scores.vstf"
    if not scores_path.exists():
        raise DataError(f"{video_id}: missing scores.vstf")
    scores = tensorio.load_tensor(scores_path).ravel()
    if scores.size != n:
        raise DataError(f"{video_id}: {scores.size} scores for {n} frames")

    gt = None
    gt_path = video_dir / "gt.vstf"
    if gt_path.exists():
        gt_arr = tensorio.load_tensor(gt_path).ravel()
        if gt_arr.size != n:
            raise DataError(f"{video_id}: {gt_arr.size} ground-truth entries for {n} frames")
        gt = gt_arr > 0.5

    signal = rewards.ssim_pipeline(video, slope_window=slope_window) if need_signal else None
    return VideoBundle(video_id=video_id, ensemble=ensemble, scores=scores,
                       signal=signal, gt=gt,
                       video=video if keep_video else None)


def load_corpus(data_dir, encoders, width: int,
                slope_window: int = rewards.DEFAULT_SLOPE_WINDOW,
                need_signal: bool = True, keep_video: bool = False) -> list[VideoBundle]:
    return [load_bundle(data_dir, vid, encoders, width, slope_window=slope_window,
                        need_signal=need_signal, keep_video=keep_video)
            for vid in list_video_ids(data_dir)]


def write_video_entry(data_dir, video_id: str, video, scores, gt,
                      encoders, width: int) -> Path:
    """Write one synthetic video in the dataset layout.

    Encoder names must be built-in kinds; their streams are computed from
    the raw frames and stored as feature files.
    """
    video_dir = Path(data_dir) / video_id
    frames.save_video(video, video_dir / "frames")
    feat_dir = video_dir / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)
    for name in encoders:
        if name not in features.BUILTIN_KINDS:
            raise DataError(f"cannot synthesize stream for non-built-in encoder {name!r}")
        stream = features.encode_builtin(video, name, width=width)
        features.save_stream(stream, feat_dir / f"{name}.vstf")
    tensorio.save_tensor(video_dir / "scores.vstf", np.asarray(scores))
    if gt is not None:
        tensorio.save_tensor(video_dir / "gt.vstf", np.asarray(gt, dtype=np.float32))
    return video_dir
