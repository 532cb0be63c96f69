"""Velocity-weighted expansion algebra and the HLL interface flux.

Multiplying an expansion by one velocity component raises the order by one;
the Hermite recursion gives the new coefficients in closed form. Truncating
back is an orthogonal projection. Signal velocities for the HLL flux come
from the spectrum of the truncated multiplication operator: mean velocity
plus extreme Hermite-root multiples of the thermal speed.
"""

from __future__ import annotations

import numpy as np

from .hermite import RootTable, index_count, index_map
from .state import GradState, MacroState

__all__ = [
    "xi_multiply",
    "truncate",
    "signal_velocities",
    "hll_flux",
    "operator_spectrum_check",
    "xi_multiply_coeffs",
]


def xi_multiply_coeffs(coeffs, u_j, theta, j: int, K_in: int, D: int):
    """Coefficients of xi_j times an order-K_in expansion, at order K_in + 1.

    Output entry at alpha is theta*f_{alpha-e_j} + u_j*f_alpha
    + (alpha_j+1)*f_{alpha+e_j}; out-of-range reads are zero. `coeffs` may
    carry leading batch axes, with `u_j`/`theta` scalars or matching batch
    arrays.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    m_out = index_map(K_in + 1, D)
    L_in = index_count(K_in, D)
    f = np.zeros(coeffs.shape[:-1] + (len(m_out),))
    f[..., :L_in] = coeffs
    theta_b = np.asarray(theta, dtype=float)[..., None] if np.ndim(theta) else float(theta)
    u_b = np.asarray(u_j, dtype=float)[..., None] if np.ndim(u_j) else float(u_j)

    d = j - 1
    out = u_b * f
    down = m_out.down1[d]
    hd = down >= 0
    out[..., hd] += theta_b * f[..., down[hd]]
    up = m_out.up1[d]
    hu = up >= 0
    out[..., hu] += (m_out.indices[:, d] + 1)[hu] * f[..., up[hu]]
    return out


def xi_multiply(state: GradState, j: int) -> GradState:
    """Expansion of xi_j * f, one order above the input, same frame."""
    if not (1 <= j <= state.D):
        raise ValueError(f"axis {j} out of range for D={state.D}")
    if state.order != state.M:
        raise ValueError("input must be stored at the truncation order")
    out = xi_multiply_coeffs(
        state.coeffs, float(state.u[j - 1]), state.theta, j, state.order, state.D
    )
    return GradState(
        D=state.D, M=state.M, u=state.u, theta=state.theta, coeffs=out, order=state.M + 1
    )


def truncate(term: GradState, K: int) -> GradState:
    """Drop coefficients above order K (orthogonal projection onto the
    lower-order space; moments of degree < term order are untouched)."""
    if K > term.order:
        raise ValueError(f"cannot truncate order {term.order} to higher order {K}")
    L = index_count(K, term.D)
    return GradState(
        D=term.D,
        M=K if K < term.M else term.M,
        u=term.u,
        theta=term.theta,
        coeffs=term.coeffs[:L],
        order=K,
    )


def signal_velocities(
    left: MacroState, right: MacroState, j: int, roots: RootTable
) -> tuple[float, float]:
    """Fastest left/right signal speeds at an interface: the extreme
    eigenvalue bounds over both adjacent states."""
    x0, xm = roots.x_min, roots.x_max
    d = j - 1
    lam_l = min(
        left.u[d] + x0 * np.sqrt(left.theta), right.u[d] + x0 * np.sqrt(right.theta)
    )
    lam_r = max(
        left.u[d] + xm * np.sqrt(left.theta), right.u[d] + xm * np.sqrt(right.theta)
    )
    return float(lam_l), float(lam_r)


def hll_flux(
    left: GradState, right_in_left_frame: GradState, j: int, lam_l: float, lam_r: float
) -> GradState:
    """HLL interface flux in the left state's frame, truncated to order M.

    Both operands must share the frame (callers project the right state
    first). Upwinds on the signal-speed signs; in between, blends the two
    one-sided fluxes with the jump term.
    """
    if lam_l > lam_r:
        raise ValueError(f"signal speeds out of order: {lam_l} > {lam_r}")
    lf = left
    rf = right_in_left_frame
    if not np.array_equal(lf.u, rf.u) or lf.theta != rf.theta:
        raise ValueError("operands must share one frame")
    M = lf.M
    if 0.0 <= lam_l:
        return truncate(xi_multiply(lf, j), M)
    if 0.0 >= lam_r:
        return truncate(xi_multiply(rf, j), M)
    fl = truncate(xi_multiply(lf, j), M).coeffs
    fr = truncate(xi_multiply(rf, j), M).coeffs
    blend = (
        lam_r * fl - lam_l * fr + lam_l * lam_r * (rf.coeffs - lf.coeffs)
    ) / (lam_r - lam_l)
    return GradState(D=lf.D, M=M, u=lf.u, theta=lf.theta, coeffs=blend, order=M)


def operator_spectrum_check(M: int, D: int, j: int, u=None, theta: float = 1.0):
    """Eigenvalues of the order-truncated multiplication by xi_j on the
    order-M space, via a dense eigensolve. Test support only."""
    L = index_count(M, D)
    if L > 200:
        raise ValueError(f"dense spectrum check limited to 200 basis functions, got {L}")
    u = np.zeros(D) if u is None else np.asarray(u, dtype=float)
    mat = np.zeros((L, L))
    for col in range(L):
        e = np.zeros(L)
        e[col] = 1.0
        prod = xi_multiply_coeffs(e, float(u[j - 1]), theta, j, M, D)
        mat[:, col] = prod[:L]
    return np.sort(np.linalg.eigvals(mat).real)
