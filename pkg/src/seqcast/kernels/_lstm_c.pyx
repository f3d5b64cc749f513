# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled LSTM sequence kernel.

Same contract as seqcast.kernels.pylstm: stacked gate order (i, f, o, c)
along the first weight axis, `literal` switches the cell update to
C_t = sigmoid(f*C_{t-1} + i*Ctilde).  The per-step recurrences and the
reverse-time gradient accumulation are the training hot path, so both run
as plain C loops here.
"""

import numpy as np

from libc.math cimport exp, sqrt, tanh

BACKEND = "compiled"


cdef inline double _sig(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def adam_update(double[::1] theta, double[::1] g, double[::1] m,
                double[::1] v, long t, double lr, double b1, double b2,
                double eps):
    """Fused bias-corrected Adam step over a flat parameter vector."""
    cdef Py_ssize_t i, n = theta.shape[0]
    cdef double c1 = 1.0 - b1 ** t
    cdef double c2 = 1.0 - b2 ** t
    with nogil:
        for i in range(n):
            m[i] = b1 * m[i] + (1.0 - b1) * g[i]
            v[i] = b2 * v[i] + (1.0 - b2) * (g[i] * g[i])
            theta[i] -= lr * ((m[i] / c1) / (sqrt(v[i] / c2) + eps))


def lstm_layer_forward(double[:, ::1] X, double[:, ::1] U, double[:, ::1] W,
                       double[::1] b, double[::1] h0, double[::1] c0,
                       bint literal=False):
    cdef Py_ssize_t steps = X.shape[0]
    cdef Py_ssize_t nin = X.shape[1]
    cdef Py_ssize_t hidden = W.shape[1]
    cdef Py_ssize_t t, r, j, k

    H_arr = np.empty((steps, hidden))
    C_arr = np.empty((steps, hidden))
    TC_arr = np.empty((steps, hidden))
    G_arr = np.empty((steps, 4 * hidden))
    pre_arr = np.empty(4 * hidden)
    hbuf_arr = np.array(h0, dtype=np.float64, copy=True)
    cbuf_arr = np.array(c0, dtype=np.float64, copy=True)

    cdef double[:, ::1] H = H_arr
    cdef double[:, ::1] C = C_arr
    cdef double[:, ::1] TC = TC_arr
    cdef double[:, ::1] G = G_arr
    cdef double[::1] pre = pre_arr
    cdef double[::1] hbuf = hbuf_arr
    cdef double[::1] cbuf = cbuf_arr
    cdef double acc, iv, fv, ov, gv, cv, tcv

    with nogil:
        for t in range(steps):
            for r in range(4 * hidden):
                acc = b[r]
                for j in range(nin):
                    acc += U[r, j] * X[t, j]
                for k in range(hidden):
                    acc += W[r, k] * hbuf[k]
                pre[r] = acc
            for k in range(hidden):
                iv = _sig(pre[k])
                fv = _sig(pre[hidden + k])
                ov = _sig(pre[2 * hidden + k])
                gv = tanh(pre[3 * hidden + k])
                cv = fv * cbuf[k] + iv * gv
                if literal:
                    cv = _sig(cv)
                tcv = tanh(cv)
                G[t, k] = iv
                G[t, hidden + k] = fv
                G[t, 2 * hidden + k] = ov
                G[t, 3 * hidden + k] = gv
                C[t, k] = cv
                TC[t, k] = tcv
                H[t, k] = tcv * ov
                hbuf[k] = H[t, k]
                cbuf[k] = cv
    return H_arr, C_arr, TC_arr, G_arr


def lstm_layer_backward(double[:, ::1] X, double[:, ::1] U, double[:, ::1] W,
                        double[::1] h0, double[::1] c0, bint literal,
                        double[:, ::1] H, double[:, ::1] C,
                        double[:, ::1] TC, double[:, ::1] G,
                        double[:, ::1] dH, dh_last=None, dc_last=None):
    cdef Py_ssize_t steps = X.shape[0]
    cdef Py_ssize_t nin = X.shape[1]
    cdef Py_ssize_t hidden = W.shape[1]
    cdef Py_ssize_t t, r, j, k

    dX_arr = np.zeros((steps, nin))
    dU_arr = np.zeros((4 * hidden, nin))
    dW_arr = np.zeros((4 * hidden, hidden))
    db_arr = np.zeros(4 * hidden)
    dh_arr = (np.zeros(hidden) if dh_last is None
              else np.array(dh_last, dtype=np.float64, copy=True))
    dc_arr = (np.zeros(hidden) if dc_last is None
              else np.array(dc_last, dtype=np.float64, copy=True))
    dpre_arr = np.empty(4 * hidden)
    dhn_arr = np.empty(hidden)

    cdef double[:, ::1] dX = dX_arr
    cdef double[:, ::1] dU = dU_arr
    cdef double[:, ::1] dW = dW_arr
    cdef double[::1] db = db_arr
    cdef double[::1] dhv = dh_arr
    cdef double[::1] dcv = dc_arr
    cdef double[::1] dpre = dpre_arr
    cdef double[::1] dhn = dhn_arr
    cdef double dh, dc, do, di, df, dg, iv, fv, ov, gv, cp, hp, acc

    with nogil:
        for t in range(steps - 1, -1, -1):
            for k in range(hidden):
                iv = G[t, k]
                fv = G[t, hidden + k]
                ov = G[t, 2 * hidden + k]
                gv = G[t, 3 * hidden + k]
                cp = C[t - 1, k] if t > 0 else c0[k]

                dh = dH[t, k] + dhv[k]
                do = dh * TC[t, k]
                dc = dh * ov * (1.0 - TC[t, k] * TC[t, k]) + dcv[k]
                if literal:
                    dc = dc * C[t, k] * (1.0 - C[t, k])
                di = dc * gv
                df = dc * cp
                dg = dc * iv
                dcv[k] = dc * fv

                dpre[k] = di * iv * (1.0 - iv)
                dpre[hidden + k] = df * fv * (1.0 - fv)
                dpre[2 * hidden + k] = do * ov * (1.0 - ov)
                dpre[3 * hidden + k] = dg * (1.0 - gv * gv)

            for r in range(4 * hidden):
                db[r] += dpre[r]
                for j in range(nin):
                    dU[r, j] += dpre[r] * X[t, j]
                if t > 0:
                    for k in range(hidden):
                        dW[r, k] += dpre[r] * H[t - 1, k]
                else:
                    for k in range(hidden):
                        dW[r, k] += dpre[r] * h0[k]

            for j in range(nin):
                acc = 0.0
                for r in range(4 * hidden):
                    acc += U[r, j] * dpre[r]
                dX[t, j] = acc
            for k in range(hidden):
                acc = 0.0
                for r in range(4 * hidden):
                    acc += W[r, k] * dpre[r]
                dhn[k] = acc
            for k in range(hidden):
                dhv[k] = dhn[k]
    return dX_arr, dU_arr, dW_arr, db_arr, dh_arr, dc_arr
