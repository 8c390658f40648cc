"""Independent brute-force reference implementations.

Everything here is deliberately written with plain loops and local
arithmetic, sharing no code with the library paths it checks.
"""

import itertools
import math

import numpy as np


def matmul_loops(a, b):
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def cosine_loops(u, v):
    du = math.sqrt(sum(x * x for x in u))
    dv = math.sqrt(sum(x * x for x in v))
    if du == 0.0 and dv == 0.0:
        return 1.0
    if du == 0.0 or dv == 0.0:
        return 0.0
    dot = sum(x * y for x, y in zip(u, v))
    return max(-1.0, min(1.0, dot / (du * dv)))


# ---------------------------------------------------------------------------
# SSIM


def gaussian_kernel_2d(size=11, sigma=1.5):
    half = (size - 1) / 2.0
    k1 = np.array([math.exp(-((i - half) ** 2) / (2 * sigma * sigma)) for i in range(size)])
    k1 /= k1.sum()
    return np.outer(k1, k1)


def ssim_loops(a, b, size=11, sigma=1.5, c1=(0.01 * 255) ** 2, c2=(0.03 * 255) ** 2):
    """Windowed SSIM with explicit reflect padding and per-pixel loops."""
    kernel = gaussian_kernel_2d(size, sigma)
    pad = size // 2
    ap = np.pad(a, pad, mode="reflect")
    bp = np.pad(b, pad, mode="reflect")
    h, w = a.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            wa = ap[i:i + size, j:j + size]
            wb = bp[i:i + size, j:j + size]
            mu_a = float((kernel * wa).sum())
            mu_b = float((kernel * wb).sum())
            var_a = float((kernel * wa * wa).sum()) - mu_a * mu_a
            var_b = float((kernel * wb * wb).sum()) - mu_b * mu_b
            cov = float((kernel * wa * wb).sum()) - mu_a * mu_b
            num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
            den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
            total += num / den
    return total / (h * w)


# ---------------------------------------------------------------------------
# rewards


def rep_loops(features, mask):
    sel = [i for i in range(len(mask)) if mask[i]]
    if not sel:
        return 0.0
    total = 0.0
    for t in range(features.shape[0]):
        best = math.inf
        for s in sel:
            d = math.sqrt(sum((features[t, j] - features[s, j]) ** 2
                              for j in range(features.shape[1])))
            best = min(best, d)
        total += best
    return math.exp(-total / features.shape[0])


def div_loops(features, mask, span=20):
    sel = [i for i in range(len(mask)) if mask[i]]
    m = len(sel)
    if m < 2:
        return 0.0
    total = 0.0
    for t in sel:
        for i in sel:
            if t == i:
                continue
            if abs(t - i) > span:
                total += 1.0
            else:
                d = 1.0 - cosine_loops(features[t], features[i])
                total += min(1.0, max(0.0, d))
    return total / (m * (m - 1))


def clsf_loops(scores, mask):
    sel = [i for i in range(len(mask)) if mask[i]]
    if not sel:
        return 0.0
    return sum(float(scores[i]) for i in sel) / len(sel)


def ssim_reward_loops(sig, mask, literal=False):
    sel = [i for i in range(len(mask)) if mask[i]]
    if not sel:
        return 0.0
    lo = min(float(x) for x in sig)
    hi = max(float(x) for x in sig)
    total = 0.0
    for i in sel:
        if hi - lo <= 0.0:
            norm = 0.0
        elif literal:
            norm = (float(sig[i]) - lo) / (hi - lo)
        else:
            norm = (hi - float(sig[i])) / (hi - lo)
        total += norm
    return total / len(sel)


def segment_average_loops(p, window):
    n = len(p)
    if n < window:
        return np.array([sum(p) / n])
    return np.array([sum(p[i:i + window]) / window for i in range(n - window + 1)])


def log_prob_loops(mask, p):
    total = 0.0
    for a, q in zip(mask, p):
        total += math.log(q) if a else math.log(1.0 - q)
    return total


def all_masks(n):
    """All 2^n boolean masks in lexicographic order."""
    for bits in itertools.product((False, True), repeat=n):
        yield np.array(bits, dtype=bool)
