"""Attention ensemble encoder: fuses K encoder vectors into one per frame.

For every frame independently, the K normalized encoder vectors form a
length-K sequence.  Multi-head self-attention over that sequence highlights
the informative encoders, a residual add plus layer normalization keeps the
original content in range, and a learned scoring vector turns the K rows
into softmax weights for the final weighted average.  The block is trained
jointly with the decoder, so exact gradients for every parameter and for
the input ensemble are provided.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .features import FeatureEnsemble
from .numerics import DTYPE


@dataclass
class FusionParams:
    """Learnable state of the fusion block.

    Projections are (f, f) for H heads over width f (f divisible by H);
    ``w_attn`` scores the K post-norm rows for the weighted average and is
    zero-initialized so fusion starts out uniform.
    """

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    ln_gain: np.ndarray
    ln_bias: np.ndarray
    w_attn: np.ndarray
    heads: int = 4

    def blocks(self):
        yield "wq", self.wq
        yield "wk", self.wk
        yield "wv", self.wv
        yield "wo", self.wo
        yield "ln_gain", self.ln_gain
        yield "ln_bias", self.ln_bias
        yield "w_attn", self.w_attn


def init_fusion(width: int, heads: int = 4, rng: np.random.Generator | None = None) -> FusionParams:
    if width % heads != 0:
        raise ValueError(f"width {width} not divisible by {heads} heads")
    rng = rng or numerics.make_rng(0)
    scale = 1.0 / np.sqrt(width)
    proj = lambda: rng.uniform(-scale, scale, size=(width, width)).astype(DTYPE)
    return FusionParams(
        wq=proj(), wk=proj(), wv=proj(), wo=proj(),
        ln_gain=np.ones(width, dtype=DTYPE),
        ln_bias=np.zeros(width, dtype=DTYPE),
        w_attn=np.zeros(width, dtype=DTYPE),
        heads=heads,
    )


def fuse_forward(ensemble, params: FusionParams):
    """Fuse an ensemble into one vector per frame.

    ``ensemble`` is a FeatureEnsemble or a raw (N, K, f) stack.  Returns
    ``(fused, cache)`` with fused of shape (N, f).
    """
    stack = ensemble.stack() if isinstance(ensemble, FeatureEnsemble) else np.asarray(ensemble, dtype=DTYPE)
    if stack.ndim != 3:
        raise ValueError(f"expected (N, K, f) stack, got {stack.shape}")
    n, k, f = stack.shape
    if params.wq.shape != (f, f):
        raise ValueError(f"ensemble width {f} does not match params width {params.wq.shape[0]}")

    att, att_cache = numerics.attention_forward(
        stack, params.wq, params.wk, params.wv, params.wo, params.heads)
    resid = stack + att
    normed, ln_cache = numerics.layer_norm(resid, params.ln_gain, params.ln_bias)

    scores = normed @ params.w_attn            # (N, K)
    weights = numerics.softmax(scores, axis=-1)
    fused = np.einsum("nk,nkf->nf", weights, normed)

    cache = (stack.shape, att_cache, ln_cache, normed, weights)
    return fused, cache


def fuse_backward(grad_fused: np.ndarray, cache, params: FusionParams):
    """Exact gradients of ``fuse_forward``.

    Returns ``(grads, grad_stack)`` where grads is keyed like
    ``FusionParams.blocks()`` and grad_stack has the input's (N, K, f) shape.
    """
    shape, att_cache, ln_cache, normed, weights = cache
    n, k, f = shape
    grad_fused = np.asarray(grad_fused, dtype=DTYPE)
    if grad_fused.shape != (n, f):
        raise ValueError(f"stale cache: grad shape {grad_fused.shape} != {(n, f)}")

    # weighted average: fused = sum_k weights[n,k] * normed[n,k,:]
    dweights = np.einsum("nf,nkf->nk", grad_fused, normed)
    dnormed = weights[:, :, None] * grad_fused[:, None, :]
    dscores = numerics.softmax_grad(weights, dweights, axis=-1)
    dw_attn = np.einsum("nk,nkf->f", dscores, normed)
    dnormed += dscores[:, :, None] * params.w_attn[None, None, :]

    dresid, dgain, dbias = numerics.layer_norm_backward(dnormed, ln_cache)
    datt = dresid
    dstack_att, att_grads = numerics.attention_backward(datt, att_cache)
    grad_stack = dresid + dstack_att

    grads = {
        "wq": att_grads["wq"],
        "wk": att_grads["wk"],
        "wv": att_grads["wv"],
        "wo": att_grads["wo"],
        "ln_gain": dgain,
        "ln_bias": dbias,
        "w_attn": dw_attn,
    }
    return grads, grad_stack
