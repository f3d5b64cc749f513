"""Pure-numpy LSTM sequence kernel (fallback backend).

Contract shared with the compiled backend: weights for one layer are stacked
along the first axis in gate order (input, forget, output, candidate), so
``U`` is (4H x In), ``W`` is (4H x H) and ``b`` is (4H,).  The `literal`
flag selects the cell update C_t = sigmoid(f*C_{t-1} + i*Ctilde) instead of
the standard C_t = f*C_{t-1} + i*Ctilde.

Forward returns, per time step, the hidden state H, cell state C, its tanh
TC, and the post-activation gates G (T x 4H); backward consumes those caches
plus per-step output gradients and returns gradients for X, U, W, b and the
initial state.
"""

from __future__ import annotations

import numpy as np

from ..numerics import sigmoid

BACKEND = "python"


def adam_update(theta, g, m, v, t, lr, b1, b2, eps):
    """Fused bias-corrected Adam step over a flat parameter vector."""
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    step = m / (1.0 - b1 ** t)
    step /= np.sqrt(v / (1.0 - b2 ** t)) + eps
    step *= lr
    theta -= step


def lstm_layer_forward(X, U, W, b, h0, c0, literal=False):
    steps, _ = X.shape
    hidden = W.shape[1]
    H = np.empty((steps, hidden))
    C = np.empty((steps, hidden))
    TC = np.empty((steps, hidden))
    G = np.empty((steps, 4 * hidden))
    h, c = h0, c0
    for t in range(steps):
        pre = U @ X[t] + W @ h + b
        gates = np.empty(4 * hidden)
        gates[:3 * hidden] = sigmoid(pre[:3 * hidden])
        gates[3 * hidden:] = np.tanh(pre[3 * hidden:])
        i = gates[:hidden]
        f = gates[hidden:2 * hidden]
        o = gates[2 * hidden:3 * hidden]
        g = gates[3 * hidden:]
        c = f * c + i * g
        if literal:
            c = sigmoid(c)
        tc = np.tanh(c)
        h = tc * o
        H[t], C[t], TC[t], G[t] = h, c, tc, gates
    return H, C, TC, G


def lstm_layer_backward(X, U, W, h0, c0, literal, H, C, TC, G,
                        dH, dh_last=None, dc_last=None):
    steps, hidden = H.shape
    dX = np.zeros_like(X)
    dU = np.zeros_like(U)
    dW = np.zeros_like(W)
    db = np.zeros(4 * hidden)
    dh_next = np.zeros(hidden) if dh_last is None else dh_last.copy()
    dc_next = np.zeros(hidden) if dc_last is None else dc_last.copy()
    for t in range(steps - 1, -1, -1):
        i = G[t, :hidden]
        f = G[t, hidden:2 * hidden]
        o = G[t, 2 * hidden:3 * hidden]
        g = G[t, 3 * hidden:]
        c_prev = C[t - 1] if t > 0 else c0
        h_prev = H[t - 1] if t > 0 else h0

        dh = dH[t] + dh_next
        do = dh * TC[t]
        dc = dh * o * (1.0 - TC[t] ** 2) + dc_next
        if literal:
            # cell passed through an outer sigmoid: ds = dc * C(1-C)
            dc = dc * C[t] * (1.0 - C[t])
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_next = dc * f

        dpre = np.empty(4 * hidden)
        dpre[:hidden] = di * i * (1.0 - i)
        dpre[hidden:2 * hidden] = df * f * (1.0 - f)
        dpre[2 * hidden:3 * hidden] = do * o * (1.0 - o)
        dpre[3 * hidden:] = dg * (1.0 - g ** 2)

        dU += np.outer(dpre, X[t])
        dW += np.outer(dpre, h_prev)
        db += dpre
        dX[t] = U.T @ dpre
        dh_next = W.T @ dpre
    return dX, dU, dW, db, dh_next, dc_next
