"""GRU and LSTM cells with explicit backpropagation through time.

GRU gates (update z, reset r, candidate c, reset applied after the
recurrent matmul):

    z = sigmoid(x Wx_z + bx_z + h Wh_z + bh_z)
    r = sigmoid(x Wx_r + bx_r + h Wh_r + bh_r)
    c = tanh(x Wx_c + bx_c + r * (h Wh_c + bh_c))
    h' = z * h + (1 - z) * c

LSTM gates (input i, forget f, candidate g, output o; forget bias starts
at 1 so early training does not erase state):

    c' = f * c + i * g
    h' = o * tanh(c')
"""

from __future__ import annotations

import numpy as np

from .layers import glorot_uniform, sigmoid


def init_gru_layer(rng: np.random.Generator, params: dict, prefix: str, d_in: int, hidden: int):
    params[f"{prefix}.wx"] = glorot_uniform(rng, (d_in, 3 * hidden))
    params[f"{prefix}.wh"] = glorot_uniform(rng, (hidden, 3 * hidden))
    params[f"{prefix}.bx"] = np.zeros(3 * hidden)
    params[f"{prefix}.bh"] = np.zeros(3 * hidden)


def gru_cell_forward(x, h, wx, wh, bx, bh):
    hidden = h.shape[-1]
    gx = x @ wx + bx
    gh = h @ wh + bh
    z = sigmoid(gx[:, :hidden] + gh[:, :hidden])
    r = sigmoid(gx[:, hidden : 2 * hidden] + gh[:, hidden : 2 * hidden])
    ch = gh[:, 2 * hidden :]
    c = np.tanh(gx[:, 2 * hidden :] + r * ch)
    h_next = z * h + (1.0 - z) * c
    return h_next, (x, h, z, r, c, ch)


def gru_cell_backward(dh_next, cache, wx, wh):
    x, h, z, r, c, ch = cache
    hidden = h.shape[-1]

    dz = dh_next * (h - c)
    dc = dh_next * (1.0 - z)
    dh = dh_next * z

    dc_pre = dc * (1.0 - c * c)
    dr = dc_pre * ch
    dch = dc_pre * r
    dz_pre = dz * z * (1.0 - z)
    dr_pre = dr * r * (1.0 - r)

    dgx = np.concatenate([dz_pre, dr_pre, dc_pre], axis=1)
    dgh = np.concatenate([dz_pre, dr_pre, dch], axis=1)

    dwx = x.T @ dgx
    dwh = h.T @ dgh
    dbx = dgx.sum(axis=0)
    dbh = dgh.sum(axis=0)
    dx = dgx @ wx.T
    dh += dgh @ wh.T
    return dx, dh, dwx, dwh, dbx, dbh


def init_lstm_layer(rng: np.random.Generator, params: dict, prefix: str, d_in: int, hidden: int):
    params[f"{prefix}.wx"] = glorot_uniform(rng, (d_in, 4 * hidden))
    params[f"{prefix}.wh"] = glorot_uniform(rng, (hidden, 4 * hidden))
    bias = np.zeros(4 * hidden)
    bias[hidden : 2 * hidden] = 1.0  # forget gate
    params[f"{prefix}.b"] = bias


def lstm_cell_forward(x, h, c, wx, wh, b):
    hidden = h.shape[-1]
    gates = x @ wx + h @ wh + b
    i = sigmoid(gates[:, :hidden])
    f = sigmoid(gates[:, hidden : 2 * hidden])
    g = np.tanh(gates[:, 2 * hidden : 3 * hidden])
    o = sigmoid(gates[:, 3 * hidden :])
    c_next = f * c + i * g
    tanh_c = np.tanh(c_next)
    h_next = o * tanh_c
    return h_next, c_next, (x, h, c, i, f, g, o, tanh_c)


def lstm_cell_backward(dh_next, dc_next, cache, wx, wh):
    x, h, c, i, f, g, o, tanh_c = cache

    do = dh_next * tanh_c
    dc_total = dc_next + dh_next * o * (1.0 - tanh_c * tanh_c)
    di = dc_total * g
    df = dc_total * c
    dg = dc_total * i
    dc_prev = dc_total * f

    di_pre = di * i * (1.0 - i)
    df_pre = df * f * (1.0 - f)
    dg_pre = dg * (1.0 - g * g)
    do_pre = do * o * (1.0 - o)
    dgates = np.concatenate([di_pre, df_pre, dg_pre, do_pre], axis=1)

    dwx = x.T @ dgates
    dwh = h.T @ dgates
    db = dgates.sum(axis=0)
    dx = dgates @ wx.T
    dh_prev = dgates @ wh.T
    return dx, dh_prev, dc_prev, dwx, dwh, db


def gru_layer_forward(x_seq: np.ndarray, params: dict, prefix: str, hidden: int):
    """Run one GRU layer over a (B, T, D) sequence; returns (B, T, H)."""
    batch, steps, _ = x_seq.shape
    wx, wh = params[f"{prefix}.wx"], params[f"{prefix}.wh"]
    bx, bh = params[f"{prefix}.bx"], params[f"{prefix}.bh"]
    h = np.zeros((batch, hidden))
    outputs = np.zeros((batch, steps, hidden))
    caches = []
    for t in range(steps):
        h, cache = gru_cell_forward(x_seq[:, t, :], h, wx, wh, bx, bh)
        outputs[:, t, :] = h
        caches.append(cache)
    return outputs, caches


def gru_layer_backward(dout_seq: np.ndarray, caches, params: dict, grads: dict, prefix: str):
    wx, wh = params[f"{prefix}.wx"], params[f"{prefix}.wh"]
    batch, steps, _ = dout_seq.shape
    dx_seq = np.zeros((batch, steps, wx.shape[0]))
    dh = np.zeros((batch, wh.shape[0]))
    for t in range(steps - 1, -1, -1):
        dx, dh, dwx, dwh, dbx, dbh = gru_cell_backward(dout_seq[:, t, :] + dh, caches[t], wx, wh)
        dx_seq[:, t, :] = dx
        grads[f"{prefix}.wx"] += dwx
        grads[f"{prefix}.wh"] += dwh
        grads[f"{prefix}.bx"] += dbx
        grads[f"{prefix}.bh"] += dbh
    return dx_seq


def lstm_layer_forward(x_seq: np.ndarray, params: dict, prefix: str, hidden: int):
    batch, steps, _ = x_seq.shape
    wx, wh, b = params[f"{prefix}.wx"], params[f"{prefix}.wh"], params[f"{prefix}.b"]
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    outputs = np.zeros((batch, steps, hidden))
    caches = []
    for t in range(steps):
        h, c, cache = lstm_cell_forward(x_seq[:, t, :], h, c, wx, wh, b)
        outputs[:, t, :] = h
        caches.append(cache)
    return outputs, caches


def lstm_layer_backward(dout_seq: np.ndarray, caches, params: dict, grads: dict, prefix: str):
    wx, wh = params[f"{prefix}.wx"], params[f"{prefix}.wh"]
    batch, steps, _ = dout_seq.shape
    hidden = wh.shape[0]
    dx_seq = np.zeros((batch, steps, wx.shape[0]))
    dh = np.zeros((batch, hidden))
    dc = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        dx, dh, dc, dwx, dwh, db = lstm_cell_backward(
            dout_seq[:, t, :] + dh, dc, caches[t], wx, wh
        )
        dx_seq[:, t, :] = dx
        grads[f"{prefix}.wx"] += dwx
        grads[f"{prefix}.wh"] += dwh
        grads[f"{prefix}.b"] += db
    return dx_seq
