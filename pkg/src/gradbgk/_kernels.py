"""Batched RK4 integration of the frame-transition ODE.

The coefficient vector F of one expansion obeys, in pseudo-time tau in [0,1],

    dF_alpha/dtau = sum_d S^2 [theta1 * R * F_{alpha-2e_d}
                               + w_d * sqrt(theta1) * F_{alpha-e_d}],

with R(tau) = (theta_hat-1)/((theta_hat-1)tau+1), S(tau) = 1-tau*R(tau), and
out-of-range indices read as zero. The system couples each alpha only to
lower orders, so each classical RK4 stage is a single sparse sweep; cost is
linear in the vector length.

Two interchangeable implementations: a numba kernel parallel over the batch
(each row's arithmetic is independent, so results do not depend on the
thread count) and a plain numpy fallback with the identical operation order.
Set GRADBGK_DISABLE_JIT=1 to force the fallback.
"""

from __future__ import annotations

import math
import os

import numpy as np

_DISABLE_JIT = os.environ.get("GRADBGK_DISABLE_JIT", "") not in ("", "0")

try:  # pragma: no cover - exercised implicitly
    if _DISABLE_JIT:
        raise ImportError
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def set_threads(n: int) -> None:
    """Cap the kernel thread count (no-op without numba)."""
    if HAVE_NUMBA and n >= 1:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def rk4_transition_numpy(F, theta1, theta_hat, w, n_sub, down1, down2):
    """Reference implementation. F: (B, V, L); returns F(1) with same shape."""
    F = np.array(F, dtype=float)
    B, V, L = F.shape
    D = down1.shape[0]
    sq = np.sqrt(theta1)
    dth = theta_hat - 1.0

    masks1 = [down1[d] >= 0 for d in range(D)]
    masks2 = [down2[d] >= 0 for d in range(D)]

    def rhs(cur, tau):
        S = 1.0 / (dth * tau + 1.0)
        R = dth * S
        c2 = S * S * theta1 * R  # (B,)
        out = np.zeros_like(cur)
        for d in range(D):
            c1 = S * S * w[:, d] * sq
            m2, m1 = masks2[d], masks1[d]
            if m2.any():
                out[:, :, m2] += c2[:, None, None] * cur[:, :, down2[d][m2]]
            if m1.any():
                out[:, :, m1] += c1[:, None, None] * cur[:, :, down1[d][m1]]
        return out

    h = 1.0 / n_sub
    cur = F
    for s in range(n_sub):
        t0 = s * h
        k1 = rhs(cur, t0)
        k2 = rhs(cur + 0.5 * h * k1, t0 + 0.5 * h)
        k3 = rhs(cur + 0.5 * h * k2, t0 + 0.5 * h)
        k4 = rhs(cur + h * k3, t0 + h)
        cur = cur + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return cur


if HAVE_NUMBA:

    @njit(cache=True)
    def _rhs_row(cur, c2, c1, down1, down2, out):
        V, L = cur.shape
        D = down1.shape[0]
        for v in range(V):
            for i in range(L):
                acc = 0.0
                for d in range(D):
                    i2 = down2[d, i]
                    if i2 >= 0:
                        acc += c2 * cur[v, i2]
                    i1 = down1[d, i]
                    if i1 >= 0:
                        acc += c1[d] * cur[v, i1]
                out[v, i] = acc

    @njit(parallel=True, cache=True)
    def _rk4_batch(F, theta1, theta_hat, w, n_sub, down1, down2, out):
        B, V, L = F.shape
        D = down1.shape[0]
        h = 1.0 / n_sub
        for b in prange(B):
            th1 = theta1[b]
            sq = math.sqrt(th1)
            dth = theta_hat[b] - 1.0
            cur = F[b].copy()
            k1 = np.empty((V, L))
            k2 = np.empty((V, L))
            k3 = np.empty((V, L))
            k4 = np.empty((V, L))
            tmp = np.empty((V, L))
            c1 = np.empty(D)
            for s in range(n_sub):
                t0 = s * h
                for stage in range(4):
                    if stage == 0:
                        tau = t0
                    elif stage == 3:
                        tau = t0 + h
                    else:
                        tau = t0 + 0.5 * h
                    S = 1.0 / (dth * tau + 1.0)
                    R = dth * S
                    c2 = S * S * th1 * R
                    for d in range(D):
                        c1[d] = S * S * w[b, d] * sq
                    if stage == 0:
                        _rhs_row(cur, c2, c1, down1, down2, k1)
                    elif stage == 1:
                        for v in range(V):
                            for i in range(L):
                                tmp[v, i] = cur[v, i] + 0.5 * h * k1[v, i]
                        _rhs_row(tmp, c2, c1, down1, down2, k2)
                    elif stage == 2:
                        for v in range(V):
                            for i in range(L):
                                tmp[v, i] = cur[v, i] + 0.5 * h * k2[v, i]
                        _rhs_row(tmp, c2, c1, down1, down2, k3)
                    else:
                        for v in range(V):
                            for i in range(L):
                                tmp[v, i] = cur[v, i] + h * k3[v, i]
                        _rhs_row(tmp, c2, c1, down1, down2, k4)
                for v in range(V):
                    for i in range(L):
                        cur[v, i] = cur[v, i] + (h / 6.0) * (
                            k1[v, i] + 2.0 * k2[v, i] + 2.0 * k3[v, i] + k4[v, i]
                        )
            out[b] = cur


def rk4_transition(F, theta1, theta_hat, w, n_sub, down1, down2):
    """Integrate the transition ODE for a batch of coefficient stacks.

    F: (B, V, L) initial vectors (V stacked expansions sharing each row's
    transition), theta1/theta_hat: (B,), w: (B, D). Returns the tau=1 state.
    """
    F = np.ascontiguousarray(F, dtype=float)
    if not HAVE_NUMBA:
        return rk4_transition_numpy(F, theta1, theta_hat, w, n_sub, down1, down2)
    out = np.empty_like(F)
    _rk4_batch(
        F,
        np.ascontiguousarray(theta1, dtype=float),
        np.ascontiguousarray(theta_hat, dtype=float),
        np.ascontiguousarray(w, dtype=float),
        n_sub,
        down1,
        down2,
        out,
    )
    return out
