"""Naive numpy re-implementations used as independent references.

Everything here works on single images (C, H, W) with explicit loops and
shares no code with the package.
"""

import math

import numpy as np


def conv2d(x, w, b=None, padding=0, dilation=1, groups=1):
    """Direct cross-correlation with zero padding; x (C, H, W), w (O, C/groups, k, k)."""
    c, h, wd = x.shape
    o, cg, k, _ = w.shape
    xp = np.zeros((c, h + 2 * padding, wd + 2 * padding))
    xp[:, padding : padding + h, padding : padding + wd] = x
    oh = h + 2 * padding - dilation * (k - 1)
    ow = wd + 2 * padding - dilation * (k - 1)
    out = np.zeros((o, oh, ow))
    opg = o // groups
    for oc in range(o):
        g = oc // opg
        for ic in range(cg):
            src = xp[g * cg + ic]
            for i in range(k):
                for j in range(k):
                    out[oc] += w[oc, ic, i, j] * src[i * dilation : i * dilation + oh, j * dilation : j * dilation + ow]
        if b is not None:
            out[oc] += b[oc]
    return out


def layer_norm(x, weight, bias, eps=1e-6):
    out = np.empty_like(x)
    c, h, w = x.shape
    for i in range(h):
        for j in range(w):
            v = x[:, i, j]
            mu = v.sum() / c
            var = ((v - mu) ** 2).sum() / c
            out[:, i, j] = weight * (v - mu) / math.sqrt(var + eps) + bias
    return out


def phi(z):
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def gelu(a):
    return np.vectorize(lambda z: z * phi(z))(a)


def simple_gate(x):
    k = x.shape[0] // 2
    return x[:k] * x[k:]


def channel_attention(x, w, b):
    pooled = x.reshape(x.shape[0], -1).mean(axis=1)
    gate = w[:, :, 0, 0] @ pooled + b
    return x * gate[:, None, None]


def row_attention(q, k, v):
    """q, k, v (C, H, W); per row softmax(q_i . k_j / sqrt(C)) over j."""
    c, h, w = q.shape
    out = np.zeros_like(v)
    weights = np.zeros((h, w, w))
    for r in range(h):
        for i in range(w):
            scores = np.array([np.dot(q[:, r, i], k[:, r, j]) / math.sqrt(c) for j in range(w)])
            e = np.exp(scores - scores.max())
            a = e / e.sum()
            weights[r, i] = a
            for j in range(w):
                out[:, r, i] += a[j] * v[:, r, j]
    return out, weights


def pixel_shuffle(x, s):
    cs, h, w = x.shape
    c = cs // (s * s)
    out = np.zeros((c, h * s, w * s))
    for ch in range(c):
        for i in range(s):
            for j in range(s):
                out[ch, i::s, j::s] = x[ch * s * s + i * s + j]
    return out


def params_np(module):
    """Module parameters as float64 numpy arrays keyed by name."""
    return {k: v.detach().double().numpy() for k, v in module.state_dict().items()}
