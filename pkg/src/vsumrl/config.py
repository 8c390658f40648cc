"""Plain-text run configuration.

Config files are UTF-8 ``key = value`` lines; blank lines and lines whose
first non-space character is ``#`` are ignored.  Unknown keys are
rejected.  Command-line flags override file values; the ``VSUMRL_CONFIG``
environment variable supplies a default config path.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .rewards import WEIGHT_PRESETS
from .trainer import TrainConfig

ENV_CONFIG = "VSUMRL_CONFIG"


@dataclass
class Config:
    """Flat key-value view of one run; see ``train_config`` for the subset
    handed to the trainer."""

    data_dir: str = "data"
    out_dir: str = "out"
    checkpoint: str = ""
    infer_sampler: str = "t15s"
    reducer: str = "pca2"
    feature_threshold: float = 0.999
    # synthetic corpus
    synth_videos: int = 10
    synth_frames: int = 100
    synth_height: int = 64
    synth_width: int = 64
    synth_noise: float = 4.0
    gt_window: int = 5
    # reward weighting (preset applies first, explicit weights override)
    reward_preset: str = ""
    w_clsf: float = 2.0 / 3.0
    w_ssim: float = 1.0 / 9.0
    w_rep: float = 1.0 / 9.0
    w_div: float = 1.0 / 9.0
    # training
    beta: float = 0.01
    epsilon: float = 0.5
    episodes: int = 10
    epochs: int = 30
    train_sampler: str = "sbs"
    decoder: str = "lstm"
    seed: int = 0
    baseline_decay: float = 0.9
    grad_clip: float = 5.0
    reg_absolute: bool = False
    lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # model shape
    encoders: tuple[str, ...] = ("downsample", "histogram")
    feature_width: int = 512
    fusion_heads: int = 4
    lstm_hidden: int = 256
    transformer_heads: int = 16
    ffn_width: int = 512
    dropout: float = 0.25
    max_frames: int = 750
    # environment knobs
    sab_window: int = 5
    diversity_span: int = 20
    slope_window: int = 10
    ssim_literal: bool = False
    # ablation grid
    grid_encoder_sets: str = ""
    grid_decoders: str = "lstm,transformer"
    grid_samplers: str = "sbs:t15s"
    grid_rewards: str = "full"
    grid_seeds: int = 5

    def train_config(self) -> TrainConfig:
        w = dict(w_clsf=self.w_clsf, w_ssim=self.w_ssim,
                 w_rep=self.w_rep, w_div=self.w_div)
        if self.reward_preset:
            if self.reward_preset not in WEIGHT_PRESETS:
                raise ConfigError(f"unknown reward preset {self.reward_preset!r}")
            p = WEIGHT_PRESETS[self.reward_preset]
            w = dict(w_clsf=p.clsf, w_ssim=p.ssim, w_rep=p.rep, w_div=p.div)
        return TrainConfig(
            beta=self.beta, epsilon=self.epsilon, episodes=self.episodes,
            epochs=self.epochs, sampler=self.train_sampler, decoder=self.decoder,
            seed=self.seed, baseline_decay=self.baseline_decay,
            grad_clip=self.grad_clip, reg_absolute=self.reg_absolute,
            lr=self.lr, adam_beta1=self.adam_beta1, adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps, encoders=tuple(self.encoders),
            feature_width=self.feature_width, fusion_heads=self.fusion_heads,
            lstm_hidden=self.lstm_hidden, transformer_heads=self.transformer_heads,
            ffn_width=self.ffn_width, dropout=self.dropout,
            max_frames=self.max_frames, sab_window=self.sab_window,
            diversity_span=self.diversity_span, slope_window=self.slope_window,
            ssim_literal=self.ssim_literal, **w)


_BOOL_WORDS = {"true": True, "yes": True, "1": True,
               "false": False, "no": False, "0": False}


def _convert(key: str, raw: str, current):
    raw = raw.strip()
    try:
        if isinstance(current, bool):
            if raw.lower() not in _BOOL_WORDS:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOL_WORDS[raw.lower()]
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, tuple):
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def apply_settings(config: Config, settings: dict[str, str], origin: str) -> Config:
    valid = {f.name for f in fields(Config)}
    for key, raw in settings.items():
        if key not in valid:
            raise ConfigError(f"{origin}: unknown config key {key!r}")
        setattr(config, key, _convert(key, raw, getattr(config, key)))
    return config


def parse_lines(text: str, origin: str) -> dict[str, str]:
    settings: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        settings[key.strip()] = value.strip()
    return settings


def load_config(path=None, overrides: dict[str, str] | None = None) -> Config:
    """Build a Config from an optional file plus override settings."""
    config = Config()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        apply_settings(config, parse_lines(p.read_text(encoding="utf-8"), str(p)), str(p))
    if overrides:
        apply_settings(config, overrides, "command line")
    config.train_config()  # validate the training subset eagerly
    if config.infer_sampler not in ("t25", "t15s"):
        raise ConfigError(f"unknown inference sampler {config.infer_sampler!r}")
    if config.reducer not in ("pca2", "none"):
        raise ConfigError(f"unknown reducer {config.reducer!r}")
    return config
