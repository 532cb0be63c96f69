"""First-order correction to the truncated distribution and its flux.

The truncation discards everything above order M; reconstructing the
order-(M+1) block from gradients of the velocity-weighted expansion (plus a
frame time-derivative term) and scaling by minus the relaxation time gives
the correction that regularizes the moment hierarchy. Its interface flux
only ever touches order-M coefficients, so cell means of density, velocity
and temperature are left exactly alone (M >= 3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hermite import index_count, index_map
from .state import GradState

__all__ = [
    "RegBlock",
    "CellContext",
    "gradient_reconstruct",
    "time_term",
    "build_reg_block",
    "reg_flux",
    "reg_block_batch",
    "reg_xi_down_batch",
]

RECONSTRUCTIONS = ("central", "van_leer")


def gradient_reconstruct(d1, d2, mode: str):
    """Combine the two one-sided differences into one slope.

    central: arithmetic mean. van_leer: harmonic-style limited mean that
    vanishes whenever the slopes oppose (|d1| + |d2| = 0 maps to 0).
    Accepts scalars or arrays.
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if mode == "central":
        out = 0.5 * (d1 + d2)
    elif mode == "van_leer":
        denom = np.abs(d1) + np.abs(d2)
        num = np.abs(d1) * d2 + np.abs(d2) * d1
        out = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0.0)
    else:
        raise ValueError(f"unknown reconstruction {mode!r}; use one of {RECONSTRUCTIONS}")
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RegBlock:
    """Order-(M+1) correction coefficients of one cell, relaxation-scaled."""

    D: int
    M: int
    u: np.ndarray
    theta: float
    block: np.ndarray  # entries for |alpha| = M+1 only, in map(M+1) grade order

    def __post_init__(self):
        want = index_count(self.M + 1, self.D) - index_count(self.M, self.D)
        if len(self.block) != want:
            raise ValueError(f"block length {len(self.block)} != grade size {want}")


@dataclass(frozen=True)
class CellContext:
    """Everything one cell needs to build its correction block.

    Products are order-(M+1) coefficient rows: the cell's own xi_j f and the
    neighbors' xi_j f projected into the cell frame, one row per spatial
    axis.
    """

    D: int
    M: int
    u_n: np.ndarray
    theta_n: float
    coeffs_n: np.ndarray  # own state at step n, order M
    u_next: np.ndarray
    theta_next: float
    own_products: np.ndarray  # (N, L1)
    nbr_products_plus: np.ndarray  # (N, L1)
    nbr_products_minus: np.ndarray  # (N, L1)
    dt: float
    dx: np.ndarray  # (N,)
    nu: float


def time_term(cell: CellContext) -> np.ndarray:
    """Frame-velocity rate factor, per velocity component."""
    if cell.dt <= 0.0:
        raise ValueError(f"need positive time step, got {cell.dt}")
    return (
        np.sqrt(cell.theta_n / cell.theta_next) * cell.u_next - cell.u_n
    ) / cell.dt


def reg_block_batch(delta_sum, time_coef, coef_n, nu, M: int, D: int):
    """Correction block for a batch of cells.

    delta_sum: (B, Lb) reconstructed gradients summed over spatial axes;
    time_coef: (B, D); coef_n: (B, L) step-n coefficients; nu: (B,).
    """
    m1 = index_map(M + 1, D)
    L = index_count(M, D)
    grade = m1.grade_slice(M + 1)
    out = np.array(delta_sum, dtype=float)
    for d in range(D):
        src = m1.down1[d, grade]  # |alpha| = M+1 shifts down to order M: always valid
        out += time_coef[:, d : d + 1] * coef_n[:, src]
    out *= -1.0 / np.asarray(nu, dtype=float)[:, None]
    return out


def reg_xi_down_batch(block, j: int, M: int, D: int):
    """Grade-M coefficients of xi_j times a pure order-(M+1) block,
    truncated to order M: only the index-raising term of the recursion
    survives. block: (B, Lb) -> (B, len(grade M))."""
    m1 = index_map(M + 1, D)
    L = index_count(M, D)
    gM = m1.grade_slice(M)
    up = m1.up1[j - 1, gM] - L  # into block storage
    mult = m1.indices[gM, j - 1] + 1
    return mult * block[:, up]


def build_reg_block(cell: CellContext, mode: str) -> RegBlock:
    """Order-(M+1) correction of one cell from its gathered context."""
    if cell.M < 3:
        raise ValueError(f"regularization needs M >= 3, got M={cell.M}")
    m1 = index_map(cell.M + 1, cell.D)
    grade = m1.grade_slice(cell.M + 1)
    N = len(cell.dx)
    delta = np.zeros(grade.stop - grade.start)
    for ax in range(N):
        d1 = (cell.nbr_products_plus[ax, grade] - cell.own_products[ax, grade]) / cell.dx[ax]
        d2 = (cell.own_products[ax, grade] - cell.nbr_products_minus[ax, grade]) / cell.dx[ax]
        delta += gradient_reconstruct(d1, d2, mode)
    block = reg_block_batch(
        delta[None, :],
        time_term(cell)[None, :],
        np.asarray(cell.coeffs_n)[None, :],
        np.array([cell.nu]),
        cell.M,
        cell.D,
    )[0]
    return RegBlock(D=cell.D, M=cell.M, u=cell.u_n, theta=cell.theta_n, block=block)


def reg_flux(
    left: RegBlock,
    right: RegBlock,
    j: int,
    lam_l: float,
    lam_r: float,
    u_target,
    theta_target: float,
) -> GradState:
    """Correction part of the interface flux, as an order-M increment.

    The one-sided pieces carry only grade-M coefficients, which any frame
    change copies verbatim, so the target frame is attached without
    re-projection.
    """
    a_left = reg_xi_down_batch(left.block[None, :], j, left.M, left.D)[0]
    a_right = reg_xi_down_batch(right.block[None, :], j, right.M, right.D)[0]
    if 0.0 <= lam_l:
        grade_vals = a_left
    elif 0.0 >= lam_r:
        grade_vals = a_right
    else:
        grade_vals = (lam_r * a_left - lam_l * a_right) / (lam_r - lam_l)
    D, M = left.D, left.M
    coeffs = np.zeros(index_count(M, D))
    coeffs[index_map(M, D).grade_slice(M)] = grade_vals
    return GradState(D=D, M=M, u=u_target, theta=theta_target, coeffs=coeffs, order=M)
