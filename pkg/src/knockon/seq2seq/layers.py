"""Differentiable building blocks: dense, layer norm, attention, dropout.

Every op returns (output, cache) on the way forward and consumes that cache
on the way back; all arithmetic is float64 so finite-difference checks are
meaningful.
"""

from __future__ import annotations

import math

import numpy as np


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform init scaled by fan-in/fan-out."""
    fan_in, fan_out = shape[0], shape[-1]
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Affine map over the last axis."""
    return x @ w + b, (x, w)


def dense_backward(dout: np.ndarray, cache):
    x, w = cache
    x2 = x.reshape(-1, x.shape[-1])
    d2 = dout.reshape(-1, dout.shape[-1])
    dw = x2.T @ d2
    db = d2.sum(axis=0)
    dx = dout @ w.T
    return dx, dw, db


def relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dout * mask


def tanh_forward(x: np.ndarray):
    y = np.tanh(x)
    return y, y


def tanh_backward(dout: np.ndarray, y: np.ndarray) -> np.ndarray:
    return dout * (1.0 - y * y)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def dropout_forward(x: np.ndarray, rate: float, train: bool, rng: np.random.Generator | None):
    """Inverted dropout; identity outside training."""
    if not train or rate <= 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout requires an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dout: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    return dout if mask is None else dout * mask


LAYERNORM_EPS = 1e-5


def layernorm_forward(x: np.ndarray, gain: np.ndarray, bias: np.ndarray):
    """Normalize over the last axis, then scale and shift."""
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LAYERNORM_EPS)
    xhat = (x - mu) * inv_std
    return xhat * gain + bias, (xhat, inv_std, gain)


def layernorm_backward(dout: np.ndarray, cache):
    xhat, inv_std, gain = cache
    axes = tuple(range(dout.ndim - 1))
    dgain = (dout * xhat).sum(axis=axes)
    dbias = dout.sum(axis=axes)
    dxhat = dout * gain
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgain, dbias


def softmax_last_axis(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(dout: np.ndarray, softmax_out: np.ndarray) -> np.ndarray:
    inner = (dout * softmax_out).sum(axis=-1, keepdims=True)
    return softmax_out * (dout - inner)


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    """Classic sin/cos positional encoding table of shape (length, dim)."""
    positions = np.arange(length, dtype=float)[:, None]
    half = np.arange(0, dim, 2, dtype=float)
    angles = positions / np.power(10000.0, half / dim)
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles[:, : table[:, 1::2].shape[1]])
    return table


def split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    """(B, T, d) -> (B, heads, T, d // heads)"""
    b, t, d = x.shape
    return x.reshape(b, t, heads, d // heads).transpose(0, 2, 1, 3)


def merge_heads(x: np.ndarray) -> np.ndarray:
    """(B, heads, T, hs) -> (B, T, heads * hs)"""
    b, h, t, hs = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * hs)


def attention_forward(q: np.ndarray, k: np.ndarray, v: np.ndarray):
    """Scaled dot-product attention over (B, heads, T, hs) tensors."""
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    weights = softmax_last_axis(scores)
    out = weights @ v
    return out, (q, k, v, weights, scale)


def attention_backward(dout: np.ndarray, cache):
    q, k, v, weights, scale = cache
    dweights = dout @ v.transpose(0, 1, 3, 2)
    dv = weights.transpose(0, 1, 3, 2) @ dout
    dscores = softmax_backward(dweights, weights)
    dq = (dscores @ k) * scale
    dk = (dscores.transpose(0, 1, 3, 2) @ q) * scale
    return dq, dk, dv


def multi_head_attention_forward(
    x: np.ndarray,
    params: dict[str, np.ndarray],
    prefix: str,
    heads: int,
):
    """Standard multi-head self-attention with learned projections."""
    q, q_cache = dense_forward(x, params[f"{prefix}.wq"], params[f"{prefix}.bq"])
    k, k_cache = dense_forward(x, params[f"{prefix}.wk"], params[f"{prefix}.bk"])
    v, v_cache = dense_forward(x, params[f"{prefix}.wv"], params[f"{prefix}.bv"])
    ctx, attn_cache = attention_forward(
        split_heads(q, heads), split_heads(k, heads), split_heads(v, heads)
    )
    merged = merge_heads(ctx)
    out, o_cache = dense_forward(merged, params[f"{prefix}.wo"], params[f"{prefix}.bo"])
    cache = (q_cache, k_cache, v_cache, attn_cache, o_cache, heads)
    return out, cache


def multi_head_attention_backward(dout: np.ndarray, cache, grads: dict, prefix: str):
    q_cache, k_cache, v_cache, attn_cache, o_cache, heads = cache
    dmerged, dwo, dbo = dense_backward(dout, o_cache)
    grads[f"{prefix}.wo"] += dwo
    grads[f"{prefix}.bo"] += dbo
    dctx = split_heads(dmerged, heads)
    dq_h, dk_h, dv_h = attention_backward(dctx, attn_cache)
    dx = np.zeros_like(q_cache[0])
    for d_h, d_cache, name in ((dq_h, q_cache, "q"), (dk_h, k_cache, "k"), (dv_h, v_cache, "v")):
        dproj, dw, db = dense_backward(merge_heads(d_h), d_cache)
        grads[f"{prefix}.w{name}"] += dw
        grads[f"{prefix}.b{name}"] += db
        dx += dproj
    return dx


def init_transformer_block(
    rng: np.random.Generator, params: dict, prefix: str, d: int, ff_dim: int
) -> None:
    for name in ("wq", "wk", "wv", "wo"):
        params[f"{prefix}.{name}"] = glorot_uniform(rng, (d, d))
    for name in ("bq", "bk", "bv", "bo"):
        params[f"{prefix}.{name}"] = np.zeros(d)
    params[f"{prefix}.ln1_g"] = np.ones(d)
    params[f"{prefix}.ln1_b"] = np.zeros(d)
    params[f"{prefix}.ln2_g"] = np.ones(d)
    params[f"{prefix}.ln2_b"] = np.zeros(d)
    params[f"{prefix}.w1"] = glorot_uniform(rng, (d, ff_dim))
    params[f"{prefix}.b1"] = np.zeros(ff_dim)
    params[f"{prefix}.w2"] = glorot_uniform(rng, (ff_dim, d))
    params[f"{prefix}.b2"] = np.zeros(d)


def transformer_block_forward(
    x: np.ndarray,
    params: dict[str, np.ndarray],
    prefix: str,
    heads: int,
    *,
    dropout: float = 0.0,
    train: bool = False,
    rng: np.random.Generator | None = None,
):
    """Pre-norm encoder block: attention + residual, feed-forward + residual."""
    normed1, ln1_cache = layernorm_forward(
        x, params[f"{prefix}.ln1_g"], params[f"{prefix}.ln1_b"]
    )
    attn, attn_cache = multi_head_attention_forward(normed1, params, prefix, heads)
    attn, drop1 = dropout_forward(attn, dropout, train, rng)
    mid = x + attn

    normed2, ln2_cache = layernorm_forward(
        mid, params[f"{prefix}.ln2_g"], params[f"{prefix}.ln2_b"]
    )
    hidden, ff1_cache = dense_forward(normed2, params[f"{prefix}.w1"], params[f"{prefix}.b1"])
    hidden, relu_mask = relu_forward(hidden)
    ff, ff2_cache = dense_forward(hidden, params[f"{prefix}.w2"], params[f"{prefix}.b2"])
    ff, drop2 = dropout_forward(ff, dropout, train, rng)
    out = mid + ff

    cache = (ln1_cache, attn_cache, drop1, ln2_cache, ff1_cache, relu_mask, ff2_cache, drop2)
    return out, cache


def transformer_block_backward(
    dout: np.ndarray, cache, params: dict, grads: dict, prefix: str
) -> np.ndarray:
    ln1_cache, attn_cache, drop1, ln2_cache, ff1_cache, relu_mask, ff2_cache, drop2 = cache

    dff = dropout_backward(dout, drop2)
    dhidden, dw2, db2 = dense_backward(dff, ff2_cache)
    grads[f"{prefix}.w2"] += dw2
    grads[f"{prefix}.b2"] += db2
    dhidden = relu_backward(dhidden, relu_mask)
    dnormed2, dw1, db1 = dense_backward(dhidden, ff1_cache)
    grads[f"{prefix}.w1"] += dw1
    grads[f"{prefix}.b1"] += db1
    dmid, dg2, db_ln2 = layernorm_backward(dnormed2, ln2_cache)
    grads[f"{prefix}.ln2_g"] += dg2
    grads[f"{prefix}.ln2_b"] += db_ln2
    dmid = dmid + dout

    dattn = dropout_backward(dmid, drop1)
    dnormed1 = multi_head_attention_backward(dattn, attn_cache, grads, prefix)
    dx, dg1, db_ln1 = layernorm_backward(dnormed1, ln1_cache)
    grads[f"{prefix}.ln1_g"] += dg1
    grads[f"{prefix}.ln1_b"] += db_ln1
    return dx + dmid


def attention_weights_from_cache(block_cache) -> np.ndarray:
    """Extract the (B, heads, T, T) attention matrix from a block cache."""
    attn_cache = block_cache[1]
    return attn_cache[3][3]
