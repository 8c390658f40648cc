"""Policy-gradient training of the fusion block and decoder.

One training step per video per epoch: the decoder's probabilities are
sampled E times (episodes), each sampled summary is scored by the four-term
reward, and the score-function estimator

    grad J ~= (1/E) * sum_e (R_e - b) * grad log p(actions_e)

drives the update, with b a per-video exponential moving average of past
mean episode rewards.  A regularizer ((mean p) - epsilon)^2 discourages
selecting too many frames; the minimized cost is beta * L_reg - J.
Gradients are clipped at a global L2 norm and applied with Adam.  Rewards
are treated as environment signals: no gradient flows through the reward
computation itself.

Training is deterministic given the master seed; every (epoch, video)
pair derives its own PCG64 stream, which also makes runs resumable from a
checkpoint without perturbing the remaining epochs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import fusion, numerics, policy, rewards, sampling
from .errors import ConfigError, DataError, NumericError
from .numerics import DTYPE, make_rng
from .rewards import RewardWeights, SsimSignal

log = logging.getLogger(__name__)

SAMPLERS = ("sbs", "sab")
DECODERS = ("lstm", "transformer")


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines a training run (model shape included)."""

    beta: float = 0.01
    epsilon: float = 0.5
    episodes: int = 10
    epochs: int = 30
    sampler: str = "sbs"
    decoder: str = "lstm"
    seed: int = 0
    baseline_decay: float = 0.9
    grad_clip: float = 5.0
    reg_absolute: bool = False
    lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    encoders: tuple[str, ...] = ("downsample", "histogram")
    feature_width: int = 512
    fusion_heads: int = 4
    lstm_hidden: int = 256
    transformer_heads: int = 16
    ffn_width: int = 512
    dropout: float = 0.25
    max_frames: int = 750
    sab_window: int = 5
    diversity_span: int = 20
    slope_window: int = 10
    ssim_literal: bool = False
    w_clsf: float = 2.0 / 3.0
    w_ssim: float = 1.0 / 9.0
    w_rep: float = 1.0 / 9.0
    w_div: float = 1.0 / 9.0

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError("beta must be >= 0")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"unknown training sampler {self.sampler!r}")
        if self.decoder not in DECODERS:
            raise ConfigError(f"unknown decoder {self.decoder!r}")
        self.weights  # validates the sum

    @property
    def weights(self) -> RewardWeights:
        return RewardWeights(clsf=self.w_clsf, ssim=self.w_ssim,
                             rep=self.w_rep, div=self.w_div)

    def canonical(self) -> str:
        """Stable text form; the checkpoint stores and hashes this."""
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(v)
            lines.append(f"{f.name} = {v!r}" if isinstance(v, float) else f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    #: fields a checkpoint must agree on before its weights can be loaded
    MODEL_FIELDS = ("decoder", "encoders", "feature_width", "fusion_heads",
                    "lstm_hidden", "transformer_heads", "ffn_width",
                    "dropout", "max_frames")

    def model_signature(self) -> str:
        parts = []
        for name in self.MODEL_FIELDS:
            v = getattr(self, name)
            if isinstance(v, tuple):
                v = ",".join(v)
            parts.append(f"{name}={v}")
        return ";".join(parts)


def config_from_canonical(text: str) -> TrainConfig:
    values = {}
    types = {f.name: f.type for f in fields(TrainConfig)}
    defaults = TrainConfig()
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, raw = line.partition(" = ")
        if key not in types:
            raise DataError(f"checkpoint config has unknown field {key!r}")
        current = getattr(defaults, key)
        if isinstance(current, bool):
            values[key] = raw == "True"
        elif isinstance(current, int):
            values[key] = int(raw)
        elif isinstance(current, float):
            values[key] = float(raw)
        elif isinstance(current, tuple):
            values[key] = tuple(x for x in raw.split(",") if x)
        else:
            values[key] = raw
    return TrainConfig(**values)


# ---------------------------------------------------------------------------
# parameter bundle


@dataclass
class SummarizerParams:
    fusion: fusion.FusionParams
    decoder: policy.LstmDecoderParams | policy.TransformerDecoderParams

    def blocks(self):
        for name, arr in self.fusion.blocks():
            yield f"fusion.{name}", arr
        for name, arr in self.decoder.blocks():
            yield f"decoder.{name}", arr


def init_params(config: TrainConfig) -> SummarizerParams:
    rng = make_rng(config.seed, 0)
    fus = fusion.init_fusion(config.feature_width, heads=config.fusion_heads, rng=rng)
    if config.decoder == "lstm":
        dec = policy.init_lstm(config.feature_width, hidden=config.lstm_hidden, rng=rng)
    else:
        dec = policy.init_transformer(
            config.feature_width, heads=config.transformer_heads,
            ffn_width=config.ffn_width, dropout_rate=config.dropout,
            max_len=config.max_frames, rng=rng)
    return SummarizerParams(fusion=fus, decoder=dec)


def forward_probs(stack: np.ndarray, params: SummarizerParams, mode: str = "infer",
                  rng: np.random.Generator | None = None):
    """Fusion + decoder forward; returns (p, fused, fusion_cache, decoder_cache)."""
    fused, fcache = fusion.fuse_forward(stack, params.fusion)
    p, dcache = policy.decode_forward(fused, params.decoder, mode=mode, rng=rng)
    return p, fused, fcache, dcache


# ---------------------------------------------------------------------------
# regularizer


def reg_loss(p: np.ndarray, epsilon: float, absolute: bool = False) -> float:
    """Penalty on the mean selection probability drifting from epsilon."""
    dev = float(np.mean(p)) - epsilon
    return abs(dev) if absolute else dev * dev


def reg_loss_grad(p: np.ndarray, epsilon: float, absolute: bool = False) -> np.ndarray:
    dev = float(np.mean(p)) - epsilon
    n = p.size
    if absolute:
        return np.full(n, np.sign(dev) / n, dtype=DTYPE)
    return np.full(n, 2.0 * dev / n, dtype=DTYPE)


# ---------------------------------------------------------------------------
# one policy-gradient step


@dataclass(frozen=True)
class StepStats:
    mean_reward: float
    reg_value: float
    loss: float
    episode_rewards: tuple[float, ...]


def policy_gradient_step(bundle, params: SummarizerParams, config: TrainConfig,
                         rng: np.random.Generator, baseline: float):
    """Gradient of beta * L_reg - J for one video.

    ``bundle`` needs .stack (N, K, f), .scores (N,) and .signal.  The
    baseline is subtracted from every episode reward; the caller owns its
    update.  Returns (grads, StepStats).
    """
    stack = bundle.stack
    fused, fcache = fusion.fuse_forward(stack, params.fusion)
    p, dcache = policy.decode_forward(fused, params.decoder, mode="train", rng=rng)
    n = p.size

    glp = np.empty((config.episodes, n), dtype=DTYPE)
    totals = np.empty(config.episodes, dtype=DTYPE)
    for e in range(config.episodes):
        if config.sampler == "sbs":
            mask = sampling.sample_sbs(p, rng)
            glp[e] = sampling.log_prob_grad(mask, p)
        else:
            mask, decisions = sampling.sample_sab_decisions(p, config.sab_window, rng)
            glp[e] = sampling.sab_log_prob_grad(decisions, p, config.sab_window)
        breakdown = rewards.summary_reward(
            fused, bundle.scores, bundle.signal, mask,
            weights=config.weights, span=config.diversity_span,
            literal_ssim=config.ssim_literal)
        totals[e] = breakdown.r_total

    advantage = totals - baseline
    grad_p = -(advantage[:, None] * glp).mean(axis=0)
    grad_p += config.beta * reg_loss_grad(p, config.epsilon, config.reg_absolute)

    dgrads, grad_fused = policy.decode_backward(grad_p, dcache, params.decoder)
    fgrads, _ = fusion.fuse_backward(grad_fused, fcache, params.fusion)
    grads = {f"decoder.{k}": v for k, v in dgrads.items()}
    grads.update({f"fusion.{k}": v for k, v in fgrads.items()})

    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}; step aborted")

    reg = reg_loss(p, config.epsilon, config.reg_absolute)
    mean_reward = float(totals.mean())
    stats = StepStats(mean_reward=mean_reward, reg_value=reg,
                      loss=config.beta * reg - mean_reward,
                      episode_rewards=tuple(float(t) for t in totals))
    return grads, stats


# ---------------------------------------------------------------------------
# checkpoints (magic "VSCK")

CHECKPOINT_MAGIC = b"VSCK"
CHECKPOINT_VERSION = 1


def _pack_section(name: str, arr: np.ndarray) -> bytes:
    if arr.dtype == np.int64:
        code, payload = 1, arr.astype("<i8").tobytes()
    else:
        code, payload = 0, np.ascontiguousarray(arr, dtype="<f8").tobytes()
    nb = name.encode("utf-8")
    head = struct.pack("<H", len(nb)) + nb + struct.pack("<BI", code, arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + payload


def save_checkpoint(path, params: SummarizerParams, opt: dict, baselines: dict,
                    epoch: int, config: TrainConfig) -> None:
    """Serialize model weights, optimizer state and training position."""
    cfg_blob = config.canonical().encode("utf-8")
    meta_blob = json.dumps({"epoch": epoch,
                            "video_ids": sorted(baselines)}).encode("utf-8")
    sections: list[bytes] = []
    for name, arr in params.blocks():
        sections.append(_pack_section(name, arr))
    for name, state in opt.items():
        sections.append(_pack_section(f"adam.{name}.m", state.m))
        sections.append(_pack_section(f"adam.{name}.v", state.v))
        sections.append(_pack_section(f"adam.{name}.step",
                                      np.array([state.step], dtype=np.int64)))
    sections.append(_pack_section(
        "baseline.values",
        np.array([baselines[k] for k in sorted(baselines)], dtype=DTYPE)))

    out = CHECKPOINT_MAGIC + struct.pack("<I", CHECKPOINT_VERSION)
    out += struct.pack("<I", len(cfg_blob)) + cfg_blob
    out += hashlib.sha256(cfg_blob).digest()
    out += struct.pack("<I", len(meta_blob)) + meta_blob
    tail = b"".join(sections)
    out += struct.pack("<I", len(sections)) + tail
    Path(path).write_bytes(out)


def _read_sections(raw: bytes, offset: int, count: int) -> dict:
    sections = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        name = raw[offset:offset + name_len].decode("utf-8")
        offset += name_len
        code, rank = struct.unpack_from("<BI", raw, offset)
        offset += 5
        dims = struct.unpack_from(f"<{rank}I", raw, offset)
        offset += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        dt = "<i8" if code == 1 else "<f8"
        arr = np.frombuffer(raw, dtype=dt, count=n, offset=offset)
        offset += 8 * n
        sections[name] = arr.astype(np.int64 if code == 1 else DTYPE).reshape(dims)
    if offset != len(raw):
        raise DataError("checkpoint has trailing bytes")
    return sections


@dataclass
class Checkpoint:
    params: SummarizerParams
    opt: dict
    baselines: dict
    epoch: int
    config: TrainConfig


def load_checkpoint(path, expect: TrainConfig | None = None,
                    for_resume: bool = False) -> Checkpoint:
    """Read a checkpoint, verifying integrity and compatibility.

    The stored config blob must hash to its recorded digest.  With
    ``expect``, the stored model fields must match (all fields for a
    resume, so the continued run is bit-identical).
    """
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: bad checkpoint magic {raw[:4]!r}")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    offset = 8
    (cfg_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    cfg_blob = raw[offset:offset + cfg_len]
    offset += cfg_len
    digest = raw[offset:offset + 32]
    offset += 32
    if hashlib.sha256(cfg_blob).digest() != digest:
        raise DataError(f"{path}: config hash mismatch; refusing to load")
    (meta_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    meta = json.loads(raw[offset:offset + meta_len].decode("utf-8"))
    offset += meta_len
    (n_sections,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    sections = _read_sections(raw, offset, n_sections)

    stored = config_from_canonical(cfg_blob.decode("utf-8"))
    if expect is not None:
        if for_resume:
            if expect.canonical() != stored.canonical():
                raise DataError("checkpoint training config differs; cannot resume")
        elif expect.model_signature() != stored.model_signature():
            raise DataError(
                f"checkpoint model {stored.model_signature()!r} does not match "
                f"configured model {expect.model_signature()!r}")

    params = init_params(stored)
    opt = {}
    for name, arr in params.blocks():
        if name not in sections:
            raise DataError(f"{path}: missing section {name!r}")
        if sections[name].shape != arr.shape:
            raise DataError(f"{path}: section {name!r} has shape "
                            f"{sections[name].shape}, expected {arr.shape}")
        arr[...] = sections[name]
        state = numerics.adam_state_like(arr, lr=stored.lr, beta1=stored.adam_beta1,
                                         beta2=stored.adam_beta2, eps=stored.adam_eps)
        state.m[...] = sections[f"adam.{name}.m"]
        state.v[...] = sections[f"adam.{name}.v"]
        state.step = int(sections[f"adam.{name}.step"][0])
        opt[name] = state
    baselines = dict(zip(meta["video_ids"],
                         sections["baseline.values"].tolist()))
    return Checkpoint(params=params, opt=opt, baselines=baselines,
                      epoch=int(meta["epoch"]), config=stored)


# ---------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_reward: float
    mean_reg: float
    mean_loss: float


@dataclass
class TrainReport:
    epochs: list[EpochStats]
    checkpoint_path: str

    def to_text(self) -> str:
        lines = ["# epoch\tmean_reward\tmean_reg\tmean_loss"]
        for row in self.epochs:
            lines.append(f"{row.epoch}\t{row.mean_reward:.9f}"
                         f"\t{row.mean_reg:.9f}\t{row.mean_loss:.9f}")
        return "\n".join(lines) + "\n"


def train(dataset, config: TrainConfig, out_dir, resume_from=None) -> TrainReport:
    """Run the full REINFORCE loop over a corpus.

    ``dataset`` is a sequence of bundles with .video_id, .stack, .scores
    and .signal; videos are processed in video_id order.  A checkpoint is
    written to ``<out_dir>/checkpoint.vsck`` at initialization and after
    every epoch.
    """
    dataset = sorted(dataset, key=lambda b: b.video_id)
    if not dataset:
        raise DataError("empty dataset")
    for b in dataset:
        n = b.stack.shape[0]
        if b.scores.shape != (n,):
            raise DataError(f"{b.video_id}: {b.scores.shape[0]} scores for {n} frames")
        if b.signal is not None and b.signal.sig.size != n:
            raise DataError(f"{b.video_id}: SSIM signal does not align with frames")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ck_path = out_dir / "checkpoint.vsck"

    if resume_from is not None:
        ck = load_checkpoint(resume_from, expect=config, for_resume=True)
        params, opt, baselines, start_epoch = ck.params, ck.opt, ck.baselines, ck.epoch
        missing = [b.video_id for b in dataset if b.video_id not in baselines]
        if missing:
            raise DataError(f"checkpoint lacks baselines for {missing}")
    else:
        params = init_params(config)
        opt = {name: numerics.adam_state_like(arr, lr=config.lr,
                                              beta1=config.adam_beta1,
                                              beta2=config.adam_beta2,
                                              eps=config.adam_eps)
               for name, arr in params.blocks()}
        baselines = {b.video_id: 0.0 for b in dataset}
        start_epoch = 0
        save_checkpoint(ck_path, params, opt, baselines, 0, config)

    history = []
    for epoch in range(start_epoch, config.epochs):
        rewards_acc, reg_acc, loss_acc = [], [], []
        for vi, bundle in enumerate(dataset):
            rng = make_rng(config.seed, 1, epoch, vi)
            try:
                grads, stats = policy_gradient_step(
                    bundle, params, config, rng, baselines[bundle.video_id])
            except NumericError:
                raise
            except Exception as exc:
                raise DataError(f"{bundle.video_id}: {exc}") from exc
            baselines[bundle.video_id] = (
                config.baseline_decay * baselines[bundle.video_id]
                + (1.0 - config.baseline_decay) * stats.mean_reward)
            numerics.clip_global_norm(grads, config.grad_clip)
            for name, arr in params.blocks():
                numerics.adam_step(arr, grads[name], opt[name])
            rewards_acc.append(stats.mean_reward)
            reg_acc.append(stats.reg_value)
            loss_acc.append(stats.loss)
        row = EpochStats(epoch=epoch + 1,
                         mean_reward=float(np.mean(rewards_acc)),
                         mean_reg=float(np.mean(reg_acc)),
                         mean_loss=float(np.mean(loss_acc)))
        history.append(row)
        log.info("epoch %d/%d mean reward %.4f", row.epoch, config.epochs, row.mean_reward)
        save_checkpoint(ck_path, params, opt, baselines, epoch + 1, config)
    return TrainReport(epochs=history, checkpoint_path=str(ck_path))
