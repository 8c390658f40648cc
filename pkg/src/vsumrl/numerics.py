"""Dense numeric kernels used by the fusion block and the decoders.

Everything here is float64 (``DTYPE``) and operates on plain numpy arrays.
The backward passes are written by hand for the small, fixed set of layer
graphs the summarizer uses (scaled dot-product attention, layer norm, LSTM
gates live in ``policy``); there is no general autodiff tape.  Every
gradient exposed by these helpers is checked against central finite
differences in the test suite.

Randomness policy: all stochastic code in the package draws from
``numpy.random.Generator`` backed by the PCG64 bit generator (a PCG-family
generator with a published reference algorithm).  Seeds are derived through
``make_rng`` so that a master seed plus a tuple of integer keys fully
determines every stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

DTYPE = np.float64


def make_rng(*keys: int) -> np.random.Generator:
    """Deterministic generator derived from a tuple of integer keys.

    PCG64 seeded through ``SeedSequence`` so distinct key tuples give
    independent streams and the same tuple always gives the same stream.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(keys))))


# ---------------------------------------------------------------------------
# basic kernels


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit conformability check."""
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two vectors, in [-1, 1].

    Degenerate cases: two zero vectors are treated as identical (similarity
    1); a single zero vector has no direction and scores 0.
    """
    u = np.asarray(u, dtype=DTYPE).ravel()
    v = np.asarray(v, dtype=DTYPE).ravel()
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 and nv == 0.0:
        return 1.0
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stabilized softmax along ``axis``."""
    x = np.asarray(x, dtype=DTYPE)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax_grad(y: np.ndarray, dy: np.ndarray, axis: int = -1) -> np.ndarray:
    """Backward through softmax given its output ``y`` and upstream ``dy``."""
    inner = np.sum(y * dy, axis=axis, keepdims=True)
    return y * (dy - inner)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp for large |x|.
    out = np.empty_like(x, dtype=DTYPE)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact Gaussian error linear unit, x * Phi(x)."""
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """d/dx gelu(x) = Phi(x) + x * phi(x)."""
    phi = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * phi


# ---------------------------------------------------------------------------
# layer norm

LN_EPS = 1e-5


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray):
    """Layer normalization over the last axis with learnable gain/bias.

    Returns (y, cache) where cache feeds ``layer_norm_backward``.
    """
    mu = np.mean(x, axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    y = gain * xhat + bias
    return y, (xhat, inv, gain)


def layer_norm_backward(dy: np.ndarray, cache):
    """Gradients of layer_norm: returns (dx, dgain, dbias)."""
    xhat, inv, gain = cache
    red = tuple(range(dy.ndim - 1))
    dgain = np.sum(dy * xhat, axis=red)
    dbias = np.sum(dy, axis=red)
    dxhat = dy * gain
    m1 = np.mean(dxhat, axis=-1, keepdims=True)
    m2 = np.mean(dxhat * xhat, axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dgain, dbias


# ---------------------------------------------------------------------------
# multi-head scaled dot-product self-attention
#
# Shared by the ensemble fusion block (sequence axis = encoders per frame)
# and the transformer decoder (sequence axis = frames).  Input is strictly
# (B, T, F) with F divisible by the head count.


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, t, f = x.shape
    return x.reshape(b, t, heads, f // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, t, d = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * d)


def attention_forward(x: np.ndarray, wq, wk, wv, wo, heads: int):
    """Self-attention over the middle axis of ``x`` (shape (B, T, F)).

    All four projections are (F, F).  Returns (out, cache).
    """
    b, t, f = x.shape
    if f % heads != 0:
        raise ValueError(f"width {f} not divisible by {heads} heads")
    if wq.shape != (f, f):
        raise ValueError(f"projection shape {wq.shape} does not match width {f}")
    d = f // heads
    q = _split_heads(x @ wq, heads)
    k = _split_heads(x @ wk, heads)
    v = _split_heads(x @ wv, heads)
    scale = 1.0 / np.sqrt(d)
    scores = np.einsum("bhtd,bhsd->bhts", q, k) * scale
    attn = softmax(scores, axis=-1)
    ctx = np.einsum("bhts,bhsd->bhtd", attn, v)
    merged = _merge_heads(ctx)
    out = merged @ wo
    cache = (x, q, k, v, attn, merged, wq, wk, wv, wo, scale)
    return out, cache


def attention_backward(dout: np.ndarray, cache):
    """Backward for ``attention_forward``.

    Returns (dx, grads) with grads keyed "wq", "wk", "wv", "wo".
    """
    x, q, k, v, attn, merged, wq, wk, wv, wo, scale = cache
    b, t, f = x.shape
    heads = q.shape[1]
    if dout.shape != (b, t, f):
        raise ValueError(f"stale cache: upstream shape {dout.shape} != {(b, t, f)}")

    flat = lambda a: a.reshape(-1, a.shape[-1])
    dwo = flat(merged).T @ flat(dout)
    dmerged = dout @ wo.T
    dctx = _split_heads(dmerged, heads)

    dattn = np.einsum("bhtd,bhsd->bhts", dctx, v)
    dv = np.einsum("bhts,bhtd->bhsd", attn, dctx)
    dscores = softmax_grad(attn, dattn, axis=-1) * scale
    dq = np.einsum("bhts,bhsd->bhtd", dscores, k)
    dk = np.einsum("bhts,bhtd->bhsd", dscores, q)

    dq_f = _merge_heads(dq)
    dk_f = _merge_heads(dk)
    dv_f = _merge_heads(dv)
    dwq = flat(x).T @ flat(dq_f)
    dwk = flat(x).T @ flat(dk_f)
    dwv = flat(x).T @ flat(dv_f)
    dx = dq_f @ wq.T + dk_f @ wk.T + dv_f @ wv.T
    return dx, {"wq": dwq, "wk": dwk, "wv": dwv, "wo": dwo}


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Per-parameter Adam accumulators plus hyperparameters.

    Defaults: lr 1e-4, beta1 0.9, beta2 0.999, eps 1e-8.  The step counter
    strictly increases; accumulators always match the parameter shape.
    """

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_state_like(param: np.ndarray, lr: float = 1e-4, beta1: float = 0.9,
                    beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(m=np.zeros_like(param, dtype=DTYPE),
                     v=np.zeros_like(param, dtype=DTYPE),
                     step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update.  Mutates ``param`` and ``state``."""
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ValueError(
            f"shape mismatch: param {param.shape}, grad {grad.shape}, state {state.m.shape}")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    param -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return param


def clip_global_norm(grads: dict, max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm.

    Returns the pre-clip global norm.
    """
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total
