"""Command-line front end.

Subcommands: ``synth`` (write a synthetic corpus), ``train`` (REINFORCE
loop), ``summarize`` (probabilities + mask + frame dump from a
checkpoint), ``evaluate`` (metric reports), ``ssim-reward`` (SSIM signal
files), ``grid`` (ablation matrix over encoder sets, decoders, samplers
and reward presets).

Runs are driven by a ``key = value`` config file (``--config``, or the
``VSUMRL_CONFIG`` environment variable); individual keys can be overridden
with ``--set key=value``.  Exit codes: 0 success, 1 usage/config error,
2 data error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataset, evaluation, frames, rewards, sampling, tensorio, trainer
from .config import ENV_CONFIG, Config, load_config
from .errors import ConfigError, DataError, NumericError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# shared helpers


def _eval_features(bundle: dataset.VideoBundle) -> np.ndarray:
    """Checkpoint-free feature matrix for similarity metrics: the mean of
    the normalized encoder streams."""
    return bundle.stack.mean(axis=1)


def _infer_mask(p: np.ndarray, sampler: str, window: int) -> np.ndarray:
    if sampler == "t25":
        return sampling.infer_t25(p)
    if sampler == "t15s":
        return sampling.infer_t15s(p, window)
    raise ConfigError(f"unknown inference sampler {sampler!r}")


def _summarize_video(cfg: Config, ck: trainer.Checkpoint, bundle: dataset.VideoBundle,
                     sampler: str, out_root: Path) -> np.ndarray:
    p, _, _, _ = trainer.forward_probs(bundle.stack, ck.params, mode="infer")
    mask = _infer_mask(p, sampler, cfg.sab_window)
    out_dir = out_root / bundle.video_id
    out_dir.mkdir(parents=True, exist_ok=True)
    tensorio.save_tensor(out_dir / "probs.vstf", p)
    tensorio.save_tensor(out_dir / "mask.vstf", mask.astype(np.float32))
    if bundle.video is not None:
        frame_dir = out_dir / "frames"
        frame_dir.mkdir(exist_ok=True)
        for idx in np.flatnonzero(mask):
            tensorio.save_pgm(frame_dir / f"{idx:06d}.pgm", bundle.video[idx])
    return mask


def _format_table(title: str, rows: list[tuple[str, float, float, float, float]]) -> str:
    header = f"{'video':<12}{'Precision':>10}{'Recall':>10}{'F-Score':>10}{'Reduction':>10}"
    lines = [title, header]
    for name, p, r, f1, red in rows:
        lines.append(f"{name:<12}{p:>10.2f}{r:>10.2f}{f1:>10.2f}{red:>10.2f}")
    return "\n".join(lines)


def _report_tables(cfg: Config, per_video: dict[str, evaluation.EvalReport],
                   mean: evaluation.EvalReport) -> str:
    temporal = [(vid, r.temporal_precision, r.temporal_recall, r.temporal_f1, r.reduction)
                for vid, r in per_video.items()]
    temporal.append(("MEAN", mean.temporal_precision, mean.temporal_recall,
                     mean.temporal_f1, mean.reduction))
    feature = [(vid, r.feature_precision, r.feature_recall, r.feature_f1, r.reduction)
               for vid, r in per_video.items()]
    feature.append(("MEAN", mean.feature_precision, mean.feature_recall,
                    mean.feature_f1, mean.reduction))
    return (_format_table("Temporal metrics", temporal) + "\n\n"
            + _format_table(
                f"Feature-similarity metrics (Th={cfg.feature_threshold}, "
                f"reducer={cfg.reducer})", feature) + "\n")


def _report_kv(per_video: dict[str, evaluation.EvalReport],
               mean: evaluation.EvalReport) -> str:
    lines = []
    for vid, rep in list(per_video.items()) + [("mean", mean)]:
        for key, value in rep.rows():
            lines.append(f"{vid}.{key} = {value:.2f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_synth(cfg: Config, args) -> int:
    tc = cfg.train_config()
    specs = frames.corpus_specs(
        cfg.synth_videos, frame_count=cfg.synth_frames, height=cfg.synth_height,
        width=cfg.synth_width, noise_amplitude=cfg.synth_noise, seed=cfg.seed,
        gt_window=cfg.gt_window)
    root = Path(cfg.data_dir)
    root.mkdir(parents=True, exist_ok=True)
    for i, spec in enumerate(specs):
        video, gt, scores = frames.generate_synthetic(spec)
        dataset.write_video_entry(root, f"vid{i:03d}", video, scores, gt,
                                  tc.encoders, tc.feature_width)
    print(f"wrote {len(specs)} videos ({cfg.synth_frames} frames each) to {root}")
    return EXIT_OK


def cmd_train(cfg: Config, args) -> int:
    tc = cfg.train_config()
    bundles = dataset.load_corpus(cfg.data_dir, tc.encoders, tc.feature_width,
                                  slope_window=tc.slope_window)
    report = trainer.train(bundles, tc, cfg.out_dir, resume_from=args.resume)
    report_path = Path(cfg.out_dir) / "report.txt"
    report_path.write_text(report.to_text(), encoding="utf-8")
    last = report.epochs[-1].mean_reward if report.epochs else float("nan")
    print(f"trained {len(bundles)} videos for {tc.epochs} epochs; "
          f"final mean reward {last:.4f}; checkpoint {report.checkpoint_path}")
    return EXIT_OK


def cmd_summarize(cfg: Config, args) -> int:
    tc = cfg.train_config()
    ck_path = args.checkpoint or cfg.checkpoint
    if not ck_path:
        raise ConfigError("summarize needs --checkpoint (or the checkpoint config key)")
    ck = trainer.load_checkpoint(ck_path, expect=tc)
    sampler = args.sampler or cfg.infer_sampler
    video_ids = [args.video] if args.video else dataset.list_video_ids(cfg.data_dir)
    out_root = Path(cfg.out_dir)
    for vid in video_ids:
        bundle = dataset.load_bundle(cfg.data_dir, vid, tc.encoders, tc.feature_width,
                                     need_signal=False, keep_video=True)
        mask = _summarize_video(cfg, ck, bundle, sampler, out_root)
        print(f"{vid}: selected {int(mask.sum())}/{mask.size} frames ({sampler})")
    return EXIT_OK


def cmd_evaluate(cfg: Config, args) -> int:
    masks_root = Path(args.masks or cfg.out_dir)
    if not masks_root.is_dir():
        raise DataError(f"{masks_root}: mask directory does not exist")
    tc = cfg.train_config()
    per_video: dict[str, evaluation.EvalReport] = {}
    for vid in dataset.list_video_ids(cfg.data_dir):
        mask_path = masks_root / vid / "mask.vstf"
        if not mask_path.exists():
            continue
        bundle = dataset.load_bundle(cfg.data_dir, vid, tc.encoders, tc.feature_width,
                                     need_signal=False)
        if bundle.gt is None:
            raise DataError(f"{vid}: no ground truth to evaluate against")
        mask = tensorio.load_tensor(mask_path).ravel() > 0.5
        if mask.size != bundle.frame_count:
            raise DataError(f"{vid}: mask length {mask.size} does not match video")
        per_video[vid] = evaluation.evaluate_video(
            _eval_features(bundle), mask, bundle.gt,
            threshold=cfg.feature_threshold, reducer=cfg.reducer)
    if not per_video:
        raise DataError(f"{masks_root}: no mask.vstf files found for the dataset")
    mean = evaluation.corpus_report(list(per_video.values()))
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = _report_tables(cfg, per_video, mean)
    (out_dir / "report.txt").write_text(table, encoding="utf-8")
    (out_dir / "report.kv").write_text(_report_kv(per_video, mean), encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def cmd_ssim(cfg: Config, args) -> int:
    if args.frames:
        video = frames.load_video(args.frames)
        name = Path(args.frames).parent.name or "video"
    elif args.video:
        video = frames.load_video(Path(cfg.data_dir) / args.video / "frames")
        name = args.video
    else:
        raise ConfigError("ssim-reward needs --video <id> or --frames <dir>")
    signal = rewards.ssim_pipeline(video, slope_window=cfg.slope_window)
    out_dir = Path(cfg.out_dir) / name
    out_dir.mkdir(parents=True, exist_ok=True)
    tensorio.save_tensor(out_dir / "ssim_sig.vstf", signal.sig)
    tensorio.save_tensor(out_dir / "ssim_slope.vstf", signal.slope)
    tensorio.save_tensor(out_dir / "ssim_keyframes.vstf",
                         signal.keyframe_mask.astype(np.float32))
    if args.csv:
        lines = [f"{i},{signal.sig[i]:.9f},{signal.slope[i]:.9f},{int(signal.keyframe_mask[i])}"
                 for i in range(video.shape[0])]
        (out_dir / "ssim.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{name}: {int(signal.keyframe_mask.sum())} keyframe candidates "
          f"of {video.shape[0]} frames")
    return EXIT_OK


def cmd_grid(cfg: Config, args) -> int:
    base = cfg.train_config()
    enc_sets = ([tuple(s.split(",")) for s in cfg.grid_encoder_sets.split(";") if s]
                if cfg.grid_encoder_sets else [base.encoders])
    decoders = [d.strip() for d in cfg.grid_decoders.split(",") if d.strip()]
    sampler_pairs = []
    for entry in cfg.grid_samplers.split(","):
        entry = entry.strip()
        if not entry:
            continue
        train_s, _, infer_s = entry.partition(":")
        sampler_pairs.append((train_s, infer_s or cfg.infer_sampler))
    presets = [p.strip() for p in cfg.grid_rewards.split(",") if p.strip()]
    out_root = Path(cfg.out_dir) / "grid"
    out_root.mkdir(parents=True, exist_ok=True)

    table_lines = [f"{'combination':<64}{'Precision':>16}{'Recall':>16}"
                   f"{'F-Score':>16}{'Reduction':>16}"]
    kv_lines: list[str] = []
    bundles_cache: dict[tuple, list] = {}
    for enc in enc_sets:
        if enc not in bundles_cache:
            bundles_cache[enc] = dataset.load_corpus(
                cfg.data_dir, enc, base.feature_width, slope_window=base.slope_window,
                keep_video=False)
        for dec in decoders:
            for train_s, infer_s in sampler_pairs:
                for preset in presets:
                    weights = rewards.WEIGHT_PRESETS.get(preset)
                    if weights is None:
                        raise ConfigError(f"unknown reward preset {preset!r}")
                    combo = f"enc={'+'.join(enc)}|dec={dec}|train={train_s}|infer={infer_s}|rewards={preset}"
                    seed_reports = []
                    for k in range(cfg.grid_seeds):
                        tc = replace(base, encoders=enc, decoder=dec, sampler=train_s,
                                     seed=base.seed + k, w_clsf=weights.clsf,
                                     w_ssim=weights.ssim, w_rep=weights.rep,
                                     w_div=weights.div)
                        run_dir = out_root / combo.replace("|", "_") / f"seed{k}"
                        trainer.train(bundles_cache[enc], tc, run_dir)
                        ck = trainer.load_checkpoint(run_dir / "checkpoint.vsck", expect=tc)
                        video_reports = []
                        for b in bundles_cache[enc]:
                            if b.gt is None:
                                raise DataError(f"{b.video_id}: grid runs need ground truth")
                            p, _, _, _ = trainer.forward_probs(b.stack, ck.params, mode="infer")
                            mask = _infer_mask(p, infer_s, tc.sab_window)
                            video_reports.append(evaluation.evaluate_video(
                                _eval_features(b), mask, b.gt,
                                threshold=cfg.feature_threshold, reducer=cfg.reducer))
                        seed_reports.append(evaluation.corpus_report(video_reports))
                    stats = evaluation.seed_statistics(seed_reports)
                    p_m, p_sd = stats["temporal_precision"]
                    r_m, r_sd = stats["temporal_recall"]
                    f_m, f_sd = stats["temporal_f1"]
                    red_m, red_sd = stats["reduction"]
                    table_lines.append(
                        f"{combo:<64}{p_m:>8.2f}±{p_sd:<7.2f}{r_m:>8.2f}±{r_sd:<7.2f}"
                        f"{f_m:>8.2f}±{f_sd:<7.2f}{red_m:>8.2f}±{red_sd:<7.2f}")
                    for key, (m, sd) in stats.items():
                        kv_lines.append(f"{combo}.{key}.mean = {m:.2f}")
                        kv_lines.append(f"{combo}.{key}.sd = {sd:.2f}")
    table = "\n".join(table_lines) + "\n"
    (out_root / "grid_report.txt").write_text(table, encoding="utf-8")
    (out_root / "grid_report.kv").write_text("\n".join(kv_lines) + "\n", encoding="utf-8")
    print(table, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument plumbing


def build_parser() -> _Parser:
    parser = _Parser(prog="vsumrl", description=__doc__.split("\n\n")[0])
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="config file (key = value lines)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key")
        p.add_argument("--data", default=None, help="dataset directory override")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.set_defaults(func=func)
        return p

    add("synth", cmd_synth, "generate a synthetic dataset")
    p_train = add("train", cmd_train, "train fusion + decoder with policy gradients")
    p_train.add_argument("--resume", default=None, help="checkpoint to resume from")
    p_train.add_argument("--epochs", type=int, default=None, help="epoch count override")
    p_sum = add("summarize", cmd_summarize, "emit masks and frames from a checkpoint")
    p_sum.add_argument("--checkpoint", default=None, help="trained checkpoint path")
    p_sum.add_argument("--video", default=None, help="single video id (default: all)")
    p_sum.add_argument("--sampler", default=None, choices=("t25", "t15s"))
    p_eval = add("evaluate", cmd_evaluate, "score masks against ground truth")
    p_eval.add_argument("--masks", default=None, help="directory of <video>/mask.vstf")
    p_ssim = add("ssim-reward", cmd_ssim, "emit SSIM signal, slope and keyframe mask")
    p_ssim.add_argument("--video", default=None, help="video id within the dataset")
    p_ssim.add_argument("--frames", default=None, help="explicit frame directory")
    p_ssim.add_argument("--csv", action="store_true", help="also write a CSV of the signals")
    add("grid", cmd_grid, "run the ablation grid and aggregate a summary table")
    return parser


def _overrides_from_args(args) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for item in args.set:
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    if args.data is not None:
        overrides["data_dir"] = args.data
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if getattr(args, "epochs", None) is not None:
        overrides["epochs"] = str(args.epochs)
    return overrides


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg_path = args.config or os.environ.get(ENV_CONFIG)
        cfg = load_config(cfg_path, _overrides_from_args(args))
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
