# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled recurrent kernels (accelerated backend).

Mirrors ``pykernels`` operation for operation; same gate layout
[input, forget, cell, output] on the fused 4H axis.  Selected at import
by ``powerscope.kernels`` when available.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def lstm_forward(double[:, :, ::1] x, double[:, ::1] wx, double[:, ::1] wh,
                 double[::1] b, double[:, ::1] h0, double[:, ::1] c0):
    """Run an LSTM layer over a (T, B, I) input; returns (h, c, gates)."""
    cdef Py_ssize_t t_len = x.shape[0], batch = x.shape[1], n_in = x.shape[2]
    cdef Py_ssize_t hid = wh.shape[0], g4 = 4 * hid
    cdef Py_ssize_t t, bb, i, k, j

    h_arr = np.empty((t_len, batch, hid))
    c_arr = np.empty((t_len, batch, hid))
    g_arr = np.empty((t_len, batch, g4))
    a_arr = np.empty((batch, g4))
    cdef double[:, :, ::1] h = h_arr, c = c_arr, g = g_arr
    cdef double[:, ::1] a = a_arr
    cdef double xv, hp, ig, fg, gg, og, cc

    with nogil:
        for t in range(t_len):
            for bb in range(batch):
                for j in range(g4):
                    a[bb, j] = b[j]
                for i in range(n_in):
                    xv = x[t, bb, i]
                    for j in range(g4):
                        a[bb, j] += xv * wx[i, j]
                for k in range(hid):
                    hp = h0[bb, k] if t == 0 else h[t - 1, bb, k]
                    for j in range(g4):
                        a[bb, j] += hp * wh[k, j]
                for k in range(hid):
                    ig = _sigmoid(a[bb, k])
                    fg = _sigmoid(a[bb, hid + k])
                    gg = tanh(a[bb, 2 * hid + k])
                    og = _sigmoid(a[bb, 3 * hid + k])
                    cc = fg * (c0[bb, k] if t == 0 else c[t - 1, bb, k]) + ig * gg
                    c[t, bb, k] = cc
                    h[t, bb, k] = og * tanh(cc)
                    g[t, bb, k] = ig
                    g[t, bb, hid + k] = fg
                    g[t, bb, 2 * hid + k] = gg
                    g[t, bb, 3 * hid + k] = og
    return h_arr, c_arr, g_arr


def lstm_backward(double[:, :, ::1] x, double[:, ::1] wx, double[:, ::1] wh,
                  double[:, ::1] h0, double[:, ::1] c0,
                  double[:, :, ::1] h, double[:, :, ::1] c,
                  double[:, :, ::1] gates, double[:, :, ::1] dh,
                  double[:, ::1] dc_last):
    """Backpropagate through :func:`lstm_forward`; returns
    (dx, dwx, dwh, db, dh0, dc0)."""
    cdef Py_ssize_t t_len = x.shape[0], batch = x.shape[1], n_in = x.shape[2]
    cdef Py_ssize_t hid = wh.shape[0], g4 = 4 * hid
    cdef Py_ssize_t t, bb, i, k, j

    dx_arr = np.empty((t_len, batch, n_in))
    dwx_arr = np.zeros((n_in, g4))
    dwh_arr = np.zeros((hid, g4))
    db_arr = np.zeros(g4)
    dhn_arr = np.zeros((batch, hid))
    dcn_arr = np.array(dc_last, copy=True)
    da_arr = np.empty((batch, g4))
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, ::1] dwx = dwx_arr, dwh = dwh_arr, da = da_arr
    cdef double[:, ::1] dh_next = dhn_arr, dc_next = dcn_arr
    cdef double[::1] db = db_arr
    cdef double ig, fg, gg, og, c_prev, h_prev, dh_t, tc, do_, dc_t, di, dg, df
    cdef double acc, dav

    with nogil:
        for t in range(t_len - 1, -1, -1):
            for bb in range(batch):
                for k in range(hid):
                    ig = gates[t, bb, k]
                    fg = gates[t, bb, hid + k]
                    gg = gates[t, bb, 2 * hid + k]
                    og = gates[t, bb, 3 * hid + k]
                    c_prev = c0[bb, k] if t == 0 else c[t - 1, bb, k]

                    dh_t = dh[t, bb, k] + dh_next[bb, k]
                    tc = tanh(c[t, bb, k])
                    do_ = dh_t * tc
                    dc_t = dc_next[bb, k] + dh_t * og * (1.0 - tc * tc)
                    di = dc_t * gg
                    dg = dc_t * ig
                    df = dc_t * c_prev
                    dc_next[bb, k] = dc_t * fg

                    da[bb, k] = di * ig * (1.0 - ig)
                    da[bb, hid + k] = df * fg * (1.0 - fg)
                    da[bb, 2 * hid + k] = dg * (1.0 - gg * gg)
                    da[bb, 3 * hid + k] = do_ * og * (1.0 - og)

                for j in range(g4):
                    dav = da[bb, j]
                    db[j] += dav
                    for i in range(n_in):
                        dwx[i, j] += x[t, bb, i] * dav
                for k in range(hid):
                    h_prev = h0[bb, k] if t == 0 else h[t - 1, bb, k]
                    for j in range(g4):
                        dwh[k, j] += h_prev * da[bb, j]
                for i in range(n_in):
                    acc = 0.0
                    for j in range(g4):
                        acc += da[bb, j] * wx[i, j]
                    dx[t, bb, i] = acc
                for k in range(hid):
                    acc = 0.0
                    for j in range(g4):
                        acc += da[bb, j] * wh[k, j]
                    dh_next[bb, k] = acc
    return dx_arr, dwx_arr, dwh_arr, db_arr, dhn_arr, dcn_arr


def lstm_infer(double[:, :, ::1] x, double[:, ::1] wx, double[:, ::1] wh,
               double[::1] b, double[:, ::1] h0, double[:, ::1] c0):
    """Forward pass keeping only the hidden states (no training cache)."""
    cdef Py_ssize_t t_len = x.shape[0], batch = x.shape[1], n_in = x.shape[2]
    cdef Py_ssize_t hid = wh.shape[0], g4 = 4 * hid
    cdef Py_ssize_t t, bb, i, k, j

    h_arr = np.empty((t_len, batch, hid))
    a_arr = np.empty((batch, g4))
    cs_arr = np.array(c0, copy=True)
    cdef double[:, :, ::1] h = h_arr
    cdef double[:, ::1] a = a_arr, cs = cs_arr
    cdef double xv, hp, ig, fg, gg, og, cc

    with nogil:
        for t in range(t_len):
            for bb in range(batch):
                for j in range(g4):
                    a[bb, j] = b[j]
                for i in range(n_in):
                    xv = x[t, bb, i]
                    for j in range(g4):
                        a[bb, j] += xv * wx[i, j]
                for k in range(hid):
                    hp = h0[bb, k] if t == 0 else h[t - 1, bb, k]
                    for j in range(g4):
                        a[bb, j] += hp * wh[k, j]
                for k in range(hid):
                    ig = _sigmoid(a[bb, k])
                    fg = _sigmoid(a[bb, hid + k])
                    gg = tanh(a[bb, 2 * hid + k])
                    og = _sigmoid(a[bb, 3 * hid + k])
                    cc = fg * cs[bb, k] + ig * gg
                    cs[bb, k] = cc
                    h[t, bb, k] = og * tanh(cc)
    return h_arr
