"""Pure-NumPy recurrent kernels (fallback backend).

The LSTM time loop is the hot path of three of the four detector
architectures; these functions define its reference semantics.  The
compiled backend in ``_ckernels`` mirrors them operation for operation.

Gate layout inside the fused (4H) axis: [input, forget, cell, output].
"""

import numpy as np


def sigmoid(z):
    """Numerically stable logistic function."""
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(x, wx, wh, b, h0, c0):
    """Run an LSTM layer over a (T, B, I) input.

    Returns (h, c, gates): hidden states (T, B, H), cell states
    (T, B, H) and post-activation gate values (T, B, 4H), everything the
    backward pass needs.
    """
    t_len, batch, _ = x.shape
    hid = wh.shape[0]
    h = np.empty((t_len, batch, hid))
    c = np.empty((t_len, batch, hid))
    gates = np.empty((t_len, batch, 4 * hid))
    h_prev, c_prev = h0, c0
    for t in range(t_len):
        a = x[t] @ wx + h_prev @ wh + b
        ig = sigmoid(a[:, :hid])
        fg = sigmoid(a[:, hid:2 * hid])
        gg = np.tanh(a[:, 2 * hid:3 * hid])
        og = sigmoid(a[:, 3 * hid:])
        c_t = fg * c_prev + ig * gg
        h_t = og * np.tanh(c_t)
        gates[t, :, :hid] = ig
        gates[t, :, hid:2 * hid] = fg
        gates[t, :, 2 * hid:3 * hid] = gg
        gates[t, :, 3 * hid:] = og
        c[t] = c_t
        h[t] = h_t
        h_prev, c_prev = h_t, c_t
    return h, c, gates


def lstm_backward(x, wx, wh, h0, c0, h, c, gates, dh, dc_last):
    """Backpropagate through :func:`lstm_forward`.

    ``dh`` carries the upstream gradient on every step's hidden state
    (zero rows for unused steps); ``dc_last`` the gradient on the final
    cell state.  Returns (dx, dwx, dwh, db, dh0, dc0).
    """
    t_len, batch, _ = x.shape
    hid = wh.shape[0]
    dx = np.empty_like(x)
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * hid)
    dh_next = np.zeros((batch, hid))
    dc_next = dc_last.copy()
    for t in range(t_len - 1, -1, -1):
        ig = gates[t, :, :hid]
        fg = gates[t, :, hid:2 * hid]
        gg = gates[t, :, 2 * hid:3 * hid]
        og = gates[t, :, 3 * hid:]
        c_prev = c[t - 1] if t > 0 else c0
        h_prev = h[t - 1] if t > 0 else h0

        dh_t = dh[t] + dh_next
        tc = np.tanh(c[t])
        do = dh_t * tc
        dc_t = dc_next + dh_t * og * (1.0 - tc * tc)
        di = dc_t * gg
        dg = dc_t * ig
        df = dc_t * c_prev
        dc_next = dc_t * fg

        da = np.empty((batch, 4 * hid))
        da[:, :hid] = di * ig * (1.0 - ig)
        da[:, hid:2 * hid] = df * fg * (1.0 - fg)
        da[:, 2 * hid:3 * hid] = dg * (1.0 - gg * gg)
        da[:, 3 * hid:] = do * og * (1.0 - og)

        dwx += x[t].T @ da
        dwh += h_prev.T @ da
        db += da.sum(axis=0)
        dx[t] = da @ wx.T
        dh_next = da @ wh.T
    return dx, dwx, dwh, db, dh_next, dc_next


def lstm_infer(x, wx, wh, b, h0, c0):
    """Forward pass keeping only the hidden states (no training cache)."""
    t_len, batch, _ = x.shape
    hid = wh.shape[0]
    h = np.empty((t_len, batch, hid))
    h_prev, c_prev = h0, c0
    for t in range(t_len):
        a = x[t] @ wx + h_prev @ wh + b
        ig = sigmoid(a[:, :hid])
        fg = sigmoid(a[:, hid:2 * hid])
        gg = np.tanh(a[:, 2 * hid:3 * hid])
        og = sigmoid(a[:, 3 * hid:])
        c_prev = fg * c_prev + ig * gg
        h_prev = og * np.tanh(c_prev)
        h[t] = h_prev
    return h
