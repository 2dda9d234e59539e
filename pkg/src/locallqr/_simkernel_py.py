"""NumPy implementation of the closed-loop simulation loops.

Used when the compiled ``_simkernel`` extension is unavailable.  The
contract matches the extension exactly.
"""

import numpy as np

BACKEND = "python"


def _shift_in(hist, fresh):
    n = fresh.shape[0]
    if hist.shape[0] > n:
        hist[n:] = hist[:-n].copy()
    hist[:n] = fresh


def run_receding(A, B, Rstack, Mstack, w, x_log, u_log, we_log, guard):
    n, N = A.shape[0], w.shape[0]
    L = Mstack.shape[1]
    Lr = Rstack.shape[1]
    hist = np.zeros(L)
    x = np.zeros(n)
    xr = np.zeros(n)
    for k in range(N):
        x_log[k] = x
        if k >= 1:
            we = x - xr
            we_log[k - 1] = we
            _shift_in(hist, we)
        u = Mstack @ hist
        u_log[k] = u
        xr = Rstack @ hist[:Lr] if Lr else np.zeros(n)
        x = A @ x + B @ u + w[k]
        if np.isnan(x).any() or np.abs(x).max() > guard:
            return k + 1
    if N:
        we_log[N - 1] = x - xr
    return N


def run_naive(A, B, Mstack, w, x_log, u_log, we_log, guard):
    n, m, N = A.shape[0], B.shape[1], w.shape[0]
    hist = np.zeros(Mstack.shape[1])
    x = np.zeros(n)
    x_prev = np.zeros(n)
    u_prev = np.zeros(m)
    for k in range(N):
        x_log[k] = x
        if k >= 1:
            w_hat = x - A @ x_prev - B @ u_prev
            we_log[k - 1] = w_hat
            _shift_in(hist, w_hat)
        u = Mstack @ hist
        u_log[k] = u
        x_prev, u_prev = x, u
        x = A @ x + B @ u + w[k]
        if np.isnan(x).any() or np.abs(x).max() > guard:
            return k + 1
    if N:
        we_log[N - 1] = x - A @ x_prev - B @ u_prev
    return N
