"""Unsupervised reinforcement-learning video summarization engine.

Per-frame feature streams are fused by an attention ensemble, scored by a
recurrent or transformer decoder, sampled into candidate summaries, and
trained by policy gradient against a four-term reward (representativeness,
diversity, classifier bias, SSIM transitions).
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericError, VsumError

__all__ = ["ConfigError", "DataError", "NumericError", "VsumError", "__version__"]
