"""Frame-selection decoders: fused features in, inclusion probabilities out.

Two interchangeable decoders map the fused (N, f) sequence to per-frame
probabilities p_t in (0, 1):

* a single-layer bidirectional LSTM (hidden size 256 per direction by
  default) whose per-frame forward/backward states feed a linear+sigmoid
  head, usable for any sequence length;
* a single-layer transformer encoder block (sinusoidal positions, 16-head
  self-attention, GeLU feed-forward with dropout on the hidden layer,
  post-norm ordering) limited to 750 frames.

Probabilities are clamped to [1e-7, 1 - 1e-7] so log-likelihoods stay
finite.  Both decoders provide exact gradients via hand-written
backpropagation (through time for the LSTM); dropout masks are replayed
from the forward cache.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import NumericError
from .numerics import DTYPE

PROB_CLAMP = 1e-7

GATE_ORDER = "i, f, g, o"  # input, forget, cell candidate, output


@dataclass
class LstmDecoderParams:
    """Bidirectional LSTM weights.

    Per direction: input projection (f, 4H), recurrent projection (H, 4H)
    and gate bias (4H,), gate slices ordered i, f, g, o with the forget
    slice initialized to 1.  The head maps the concatenated (2H,) state of
    each frame to one logit.
    """

    wx_fwd: np.ndarray
    wh_fwd: np.ndarray
    b_fwd: np.ndarray
    wx_bwd: np.ndarray
    wh_bwd: np.ndarray
    b_bwd: np.ndarray
    w_head: np.ndarray
    b_head: np.ndarray  # shape (1,)
    hidden: int = 256

    def blocks(self):
        yield "wx_fwd", self.wx_fwd
        yield "wh_fwd", self.wh_fwd
        yield "b_fwd", self.b_fwd
        yield "wx_bwd", self.wx_bwd
        yield "wh_bwd", self.wh_bwd
        yield "b_bwd", self.b_bwd
        yield "w_head", self.w_head
        yield "b_head", self.b_head


@dataclass
class TransformerDecoderParams:
    """Single transformer encoder block plus sigmoid head.

    ``pos_table`` is the fixed sinusoidal position encoding (not learned,
    not checkpointed as a parameter block).  Dropout applies to the
    feed-forward hidden layer only, during training.
    """

    pos_table: np.ndarray  # (max_len, f), constant
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    ln1_gain: np.ndarray
    ln1_bias: np.ndarray
    w_ff1: np.ndarray
    b_ff1: np.ndarray
    w_ff2: np.ndarray
    b_ff2: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray
    w_head: np.ndarray
    b_head: np.ndarray  # shape (1,)
    heads: int = 16
    dropout_rate: float = 0.25
    max_len: int = 750

    def blocks(self):
        yield "wq", self.wq
        yield "wk", self.wk
        yield "wv", self.wv
        yield "wo", self.wo
        yield "ln1_gain", self.ln1_gain
        yield "ln1_bias", self.ln1_bias
        yield "w_ff1", self.w_ff1
        yield "b_ff1", self.b_ff1
        yield "w_ff2", self.w_ff2
        yield "b_ff2", self.b_ff2
        yield "ln2_gain", self.ln2_gain
        yield "ln2_bias", self.ln2_bias
        yield "w_head", self.w_head
        yield "b_head", self.b_head


DecoderParams = LstmDecoderParams | TransformerDecoderParams


def init_lstm(width: int, hidden: int = 256,
              rng: np.random.Generator | None = None) -> LstmDecoderParams:
    rng = rng or numerics.make_rng(0)

    def cell():
        wx = rng.uniform(-1, 1, size=(width, 4 * hidden)) / np.sqrt(width)
        wh = rng.uniform(-1, 1, size=(hidden, 4 * hidden)) / np.sqrt(hidden)
        b = np.zeros(4 * hidden, dtype=DTYPE)
        b[hidden:2 * hidden] = 1.0  # forget gate bias
        return wx.astype(DTYPE), wh.astype(DTYPE), b

    wx_f, wh_f, b_f = cell()
    wx_b, wh_b, b_b = cell()
    w_head = (rng.uniform(-1, 1, size=2 * hidden) / np.sqrt(2 * hidden)).astype(DTYPE)
    return LstmDecoderParams(wx_f, wh_f, b_f, wx_b, wh_b, b_b,
                             w_head, np.zeros(1, dtype=DTYPE), hidden=hidden)


def sinusoid_table(max_len: int, width: int) -> np.ndarray:
    """Standard sine/cosine position encoding table."""
    if width % 2 != 0:
        raise ValueError("position encoding needs an even width")
    pos = np.arange(max_len, dtype=DTYPE)[:, None]
    div = np.exp(np.arange(0, width, 2, dtype=DTYPE) * (-np.log(10000.0) / width))
    table = np.zeros((max_len, width), dtype=DTYPE)
    table[:, 0::2] = np.sin(pos * div)
    table[:, 1::2] = np.cos(pos * div)
    return table


def init_transformer(width: int, heads: int = 16, ffn_width: int = 512,
                     dropout_rate: float = 0.25, max_len: int = 750,
                     rng: np.random.Generator | None = None) -> TransformerDecoderParams:
    if width % heads != 0:
        raise ValueError(f"width {width} not divisible by {heads} heads")
    rng = rng or numerics.make_rng(0)
    u = lambda shape, fan: (rng.uniform(-1, 1, size=shape) / np.sqrt(fan)).astype(DTYPE)
    return TransformerDecoderParams(
        pos_table=sinusoid_table(max_len, width),
        wq=u((width, width), width), wk=u((width, width), width),
        wv=u((width, width), width), wo=u((width, width), width),
        ln1_gain=np.ones(width, dtype=DTYPE), ln1_bias=np.zeros(width, dtype=DTYPE),
        w_ff1=u((width, ffn_width), width), b_ff1=np.zeros(ffn_width, dtype=DTYPE),
        w_ff2=u((ffn_width, width), ffn_width), b_ff2=np.zeros(width, dtype=DTYPE),
        ln2_gain=np.ones(width, dtype=DTYPE), ln2_bias=np.zeros(width, dtype=DTYPE),
        w_head=u(width, width), b_head=np.zeros(1, dtype=DTYPE),
        heads=heads, dropout_rate=dropout_rate, max_len=max_len,
    )


# ---------------------------------------------------------------------------
# LSTM forward / backward (one direction)


def _lstm_cell_forward(xs: np.ndarray, wx, wh, b):
    n = xs.shape[0]
    hidden = wh.shape[0]
    i_a = np.empty((n, hidden), dtype=DTYPE)
    f_a = np.empty((n, hidden), dtype=DTYPE)
    g_a = np.empty((n, hidden), dtype=DTYPE)
    o_a = np.empty((n, hidden), dtype=DTYPE)
    c_prev_a = np.empty((n, hidden), dtype=DTYPE)
    tanh_c_a = np.empty((n, hidden), dtype=DTYPE)
    h_a = np.empty((n, hidden), dtype=DTYPE)

    h = np.zeros(hidden, dtype=DTYPE)
    c = np.zeros(hidden, dtype=DTYPE)
    for t in range(n):
        z = xs[t] @ wx + h @ wh + b
        i = numerics.sigmoid(z[:hidden])
        f = numerics.sigmoid(z[hidden:2 * hidden])
        g = np.tanh(z[2 * hidden:3 * hidden])
        o = numerics.sigmoid(z[3 * hidden:])
        c_prev_a[t] = c
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        i_a[t], f_a[t], g_a[t], o_a[t] = i, f, g, o
        tanh_c_a[t] = tc
        h_a[t] = h
    return h_a, (xs, i_a, f_a, g_a, o_a, c_prev_a, tanh_c_a, h_a)


def _lstm_cell_backward(dh_out: np.ndarray, cell_cache, wx, wh):
    xs, i_a, f_a, g_a, o_a, c_prev_a, tanh_c_a, h_a = cell_cache
    n, hidden = dh_out.shape
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * hidden, dtype=DTYPE)
    dxs = np.empty_like(xs)

    dh_carry = np.zeros(hidden, dtype=DTYPE)
    dc_carry = np.zeros(hidden, dtype=DTYPE)
    for t in reversed(range(n)):
        i, f, g, o = i_a[t], f_a[t], g_a[t], o_a[t]
        tc = tanh_c_a[t]
        dh = dh_out[t] + dh_carry
        do = dh * tc
        dc = dc_carry + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev_a[t]
        dc_carry = dc * f

        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ])
        h_prev = h_a[t - 1] if t > 0 else np.zeros(hidden, dtype=DTYPE)
        dwx += np.outer(xs[t], dz)
        dwh += np.outer(h_prev, dz)
        db += dz
        dxs[t] = wx @ dz
        dh_carry = wh @ dz
    return dxs, dwx, dwh, db


def _lstm_forward(fused: np.ndarray, params: LstmDecoderParams):
    h_fwd, cache_fwd = _lstm_cell_forward(fused, params.wx_fwd, params.wh_fwd, params.b_fwd)
    h_rev, cache_bwd = _lstm_cell_forward(fused[::-1], params.wx_bwd, params.wh_bwd, params.b_bwd)
    h_bwd = h_rev[::-1]
    hcat = np.concatenate([h_fwd, h_bwd], axis=1)
    logits = hcat @ params.w_head + params.b_head[0]
    p_raw = numerics.sigmoid(logits)
    cache = ("lstm", cache_fwd, cache_bwd, hcat, p_raw)
    return p_raw, cache


def _lstm_backward(grad_p: np.ndarray, cache, params: LstmDecoderParams):
    _, cache_fwd, cache_bwd, hcat, p_raw = cache
    hidden = params.hidden
    dlogits = grad_p * p_raw * (1.0 - p_raw)
    dw_head = hcat.T @ dlogits
    db_head = np.array([dlogits.sum()], dtype=DTYPE)
    dhcat = np.outer(dlogits, params.w_head)

    dx_fwd, dwx_f, dwh_f, db_f = _lstm_cell_backward(
        dhcat[:, :hidden], cache_fwd, params.wx_fwd, params.wh_fwd)
    dx_rev, dwx_b, dwh_b, db_b = _lstm_cell_backward(
        dhcat[::-1, hidden:], cache_bwd, params.wx_bwd, params.wh_bwd)
    grad_fused = dx_fwd + dx_rev[::-1]
    grads = {
        "wx_fwd": dwx_f, "wh_fwd": dwh_f, "b_fwd": db_f,
        "wx_bwd": dwx_b, "wh_bwd": dwh_b, "b_bwd": db_b,
        "w_head": dw_head, "b_head": db_head,
    }
    return grads, grad_fused


# ---------------------------------------------------------------------------
# transformer forward / backward


def _transformer_forward(fused: np.ndarray, params: TransformerDecoderParams,
                         mode: str, rng: np.random.Generator | None):
    n, f = fused.shape
    if n > params.max_len:
        raise ValueError(f"sequence of {n} frames exceeds the {params.max_len}-frame limit")
    u = fused + params.pos_table[:n]

    att, att_cache = numerics.attention_forward(
        u[None], params.wq, params.wk, params.wv, params.wo, params.heads)
    x1, ln1_cache = numerics.layer_norm(u + att[0], params.ln1_gain, params.ln1_bias)

    h_pre = x1 @ params.w_ff1 + params.b_ff1
    h_act = numerics.gelu(h_pre)
    mask = None
    if mode == "train" and params.dropout_rate > 0.0:
        if rng is None:
            raise ValueError("train-mode dropout needs an rng")
        keep = 1.0 - params.dropout_rate
        mask = (rng.random(h_act.shape) < keep).astype(DTYPE) / keep
        h_drop = h_act * mask
    else:
        h_drop = h_act
    y = h_drop @ params.w_ff2 + params.b_ff2
    x2, ln2_cache = numerics.layer_norm(x1 + y, params.ln2_gain, params.ln2_bias)

    logits = x2 @ params.w_head + params.b_head[0]
    p_raw = numerics.sigmoid(logits)
    cache = ("transformer", att_cache, ln1_cache, x1, h_pre, mask, h_drop,
             ln2_cache, x2, p_raw)
    return p_raw, cache


def _transformer_backward(grad_p: np.ndarray, cache, params: TransformerDecoderParams):
    (_, att_cache, ln1_cache, x1, h_pre, mask, h_drop, ln2_cache, x2, p_raw) = cache

    dlogits = grad_p * p_raw * (1.0 - p_raw)
    dw_head = x2.T @ dlogits
    db_head = np.array([dlogits.sum()], dtype=DTYPE)
    dx2 = np.outer(dlogits, params.w_head)

    dr2, dg2, dbias2 = numerics.layer_norm_backward(dx2, ln2_cache)
    dy = dr2
    dw_ff2 = h_drop.T @ dy
    db_ff2 = dy.sum(axis=0)
    dh_drop = dy @ params.w_ff2.T
    dh_act = dh_drop * mask if mask is not None else dh_drop
    dh_pre = dh_act * numerics.gelu_grad(h_pre)
    dw_ff1 = x1.T @ dh_pre
    db_ff1 = dh_pre.sum(axis=0)
    dx1 = dr2 + dh_pre @ params.w_ff1.T

    dr1, dg1, dbias1 = numerics.layer_norm_backward(dx1, ln1_cache)
    du_att, att_grads = numerics.attention_backward(dr1[None], att_cache)
    grad_fused = dr1 + du_att[0]

    grads = {
        "wq": att_grads["wq"], "wk": att_grads["wk"],
        "wv": att_grads["wv"], "wo": att_grads["wo"],
        "ln1_gain": dg1, "ln1_bias": dbias1,
        "w_ff1": dw_ff1, "b_ff1": db_ff1,
        "w_ff2": dw_ff2, "b_ff2": db_ff2,
        "ln2_gain": dg2, "ln2_bias": dbias2,
        "w_head": dw_head, "b_head": db_head,
    }
    return grads, grad_fused


# ---------------------------------------------------------------------------
# public surface


def decode_forward(fused: np.ndarray, params: DecoderParams, mode: str = "infer",
                   rng: np.random.Generator | None = None):
    """Compute per-frame inclusion probabilities.

    ``mode="train"`` enables (inverted) dropout where the decoder has any;
    ``mode="infer"`` is a pure function of (fused, params).  Returns
    ``(p, cache)`` with p clamped inside (0, 1).
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"unknown mode {mode!r}")
    fused = np.asarray(fused, dtype=DTYPE)
    if fused.ndim != 2:
        raise ValueError(f"fused input must be (N, f), got {fused.shape}")
    if isinstance(params, LstmDecoderParams):
        p_raw, cache = _lstm_forward(fused, params)
    elif isinstance(params, TransformerDecoderParams):
        p_raw, cache = _transformer_forward(fused, params, mode, rng)
    else:
        raise TypeError(f"unknown decoder params {type(params).__name__}")
    if not np.all(np.isfinite(p_raw)):
        raise NumericError("decoder produced non-finite probabilities")
    return np.clip(p_raw, PROB_CLAMP, 1.0 - PROB_CLAMP), cache


def decode_backward(grad_p: np.ndarray, cache, params: DecoderParams):
    """Exact gradients through the decoder.

    ``grad_p`` is d(loss)/d(p); the clamp is treated as identity (the
    sigmoid derivative is already ~1e-7 wherever the clamp binds).  Returns
    ``(grads, grad_fused)``.
    """
    grad_p = np.asarray(grad_p, dtype=DTYPE)
    kind = cache[0]
    if grad_p.shape != cache[-1].shape:
        raise ValueError(f"stale cache: grad shape {grad_p.shape} != {cache[-1].shape}")
    if isinstance(params, LstmDecoderParams):
        if kind != "lstm":
            raise ValueError("cache does not belong to an LSTM decoder")
        return _lstm_backward(grad_p, cache, params)
    if isinstance(params, TransformerDecoderParams):
        if kind != "transformer":
            raise ValueError("cache does not belong to a transformer decoder")
        return _transformer_backward(grad_p, cache, params)
    raise TypeError(f"unknown decoder params {type(params).__name__}")
