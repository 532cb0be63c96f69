"""Conservative projection of a Hermite expansion between frames.

Changing the expansion center/scaling from (u1, theta1) to (u2, theta2) while
preserving every moment up to the truncation order reduces to integrating a
linear, upper-triangular ODE over a unit pseudo-time interval. The operator
is invertible: projecting back recovers the original coefficients up to the
integration error of the Runge-Kutta steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .hermite import index_count, index_map
from .state import GradState

__all__ = [
    "FrameTransition",
    "SubstepPolicy",
    "DEFAULT_POLICY",
    "project",
    "solve_transition_ode",
    "roundtrip_defect",
    "batch_project",
]

# theta ratios beyond which a transition is split into two legs through the
# geometric-mean frame, to keep R and S well scaled
_CHAIN_LO, _CHAIN_HI = 0.25, 4.0


@dataclass(frozen=True)
class SubstepPolicy:
    """Adaptive Runge-Kutta substep policy for one projection.

    Start with `start` uniform steps; if the momentum/energy defect of the
    transition exceeds `residual_tol` (relative), double the step count up
    to `cap`.
    """

    start: int = 2
    cap: int = 32
    residual_tol: float = 1e-10

    def __post_init__(self):
        if self.start < 1 or self.cap < self.start:
            raise ValueError(f"bad substep policy ({self.start}, {self.cap})")


DEFAULT_POLICY = SubstepPolicy()


@dataclass(frozen=True)
class FrameTransition:
    """Scalar data of one frame change, with the pseudo-time weights."""

    theta1: float
    theta2: float
    theta_hat: float  # sqrt(theta1 / theta2)
    w: np.ndarray  # (u1 - u2) / sqrt(theta2)

    @staticmethod
    def between(u1, theta1: float, u2, theta2: float) -> "FrameTransition":
        if theta2 <= 0.0:
            raise ValueError(f"target temperature must be positive, got {theta2}")
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        return FrameTransition(
            theta1=float(theta1),
            theta2=float(theta2),
            theta_hat=math.sqrt(theta1 / theta2),
            w=(u1 - u2) / math.sqrt(theta2),
        )

    def R(self, tau: float) -> float:
        return (self.theta_hat - 1.0) / ((self.theta_hat - 1.0) * tau + 1.0)

    def S(self, tau: float) -> float:
        return 1.0 - tau * self.R(tau)


def solve_transition_ode(F0, trans: FrameTransition, n_sub: int):
    """Advance one coefficient vector (or a (V, L) stack) to tau = 1."""
    if n_sub < 1:
        raise ValueError(f"need at least one substep, got {n_sub}")
    F0 = np.asarray(F0, dtype=float)
    single = F0.ndim == 1
    F = F0.reshape(1, 1, -1) if single else F0.reshape((1,) + F0.shape)
    D = len(trans.w)
    K = _order_from_length(F.shape[-1], D)
    m = index_map(K, D)
    out = _kernels.rk4_transition(
        F,
        np.array([trans.theta1]),
        np.array([trans.theta_hat]),
        trans.w.reshape(1, -1),
        n_sub,
        m.down1,
        m.down2,
    )
    return out[0, 0] if single else out[0]


def _order_from_length(L: int, D: int) -> int:
    K = 0
    while index_count(K, D) < L:
        K += 1
    if index_count(K, D) != L:
        raise ValueError(f"coefficient length {L} is not a full order for D={D}")
    return K


def project(
    state: GradState,
    u2,
    theta2: float,
    order: int | None = None,
    policy: SubstepPolicy = DEFAULT_POLICY,
) -> GradState:
    """Project `state` into the frame (u2, theta2) at storage order `order`.

    Preserves all monomial moments of degree <= order up to the substep
    policy's tolerance. Lifting the order zero-pads; the graded layout makes
    the added coefficients initially zero.
    """
    if theta2 <= 0.0:
        raise ValueError(f"target temperature must be positive, got {theta2}")
    if order is None:
        order = state.order
    if order < state.order:
        raise ValueError(f"cannot project to lower order {order} < {state.order}")
    u2 = np.asarray(u2, dtype=float)

    theta_ratio = state.theta / theta2
    if not (_CHAIN_LO <= math.sqrt(theta_ratio) <= _CHAIN_HI):
        mid_theta = math.sqrt(state.theta * theta2)
        mid_u = 0.5 * (state.u + u2)
        half = project(state, mid_u, mid_theta, order, policy)
        return project(half, u2, theta2, order, policy)

    L = index_count(order, state.D)
    F0 = np.zeros(L)
    F0[: len(state.coeffs)] = state.coeffs
    m = index_map(order, state.D)
    trans = FrameTransition.between(state.u, state.theta, u2, theta2)

    ref = _moment_triplet(F0, state.u, state.theta, m)
    scale = max(abs(ref[0]), float(np.max(np.abs(ref[1]))), abs(ref[2]), 1e-300)
    n = policy.start
    while True:
        F1 = solve_transition_ode(F0, trans, n)
        got = _moment_triplet(F1, u2, theta2, m)
        res = max(float(np.max(np.abs(got[1] - ref[1]))), abs(got[2] - ref[2])) / scale
        if res <= policy.residual_tol or n >= policy.cap:
            break
        n = min(2 * n, policy.cap)
    return GradState(
        D=state.D, M=state.M, u=u2, theta=theta2, coeffs=F1, order=order
    )


def _moment_triplet(coef, u_frame, theta_frame, m):
    """(mass, momentum vector, energy) of one expansion from its low-order
    coefficients; valid for any storage order >= 2."""
    rho = coef[0]
    u_frame = np.asarray(u_frame, dtype=float)
    fe = np.array([coef[m.unit_offset(d)] for d in range(1, m.D + 1)])
    f2e = np.array([coef[m.double_unit_offset(d)] for d in range(1, m.D + 1)])
    mom = rho * u_frame + fe
    energy = rho * float(u_frame @ u_frame) + 2.0 * float(u_frame @ fe) + m.D * theta_frame * rho + 2.0 * float(f2e.sum())
    return rho, mom, energy


def roundtrip_defect(state: GradState, u2, theta2: float, n_sub: int) -> float:
    """Max-norm coefficient defect of projecting to (u2, theta2) and back."""
    policy = SubstepPolicy(start=n_sub, cap=n_sub, residual_tol=0.0)
    there = project(state, u2, theta2, state.order, policy)
    back = project(there, state.u, state.theta, state.order, policy)
    return float(np.max(np.abs(back.coeffs - state.coeffs)))


def batch_project(F, u1, theta1, u2, theta2, K: int, D: int, policy: SubstepPolicy):
    """Project a batch of coefficient stacks between per-row frames.

    F: (B, V, L); u1, u2: (B, D); theta1, theta2: (B,). All rows use the
    policy's starting substep count; rows whose momentum/energy defect
    exceeds the tolerance are redone with doubled substeps until the cap.
    Returns the projected (B, V, L) array.
    """
    F = np.ascontiguousarray(F, dtype=float)
    B = F.shape[0]
    m = index_map(K, D)
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    theta_hat = np.sqrt(theta1 / theta2)
    w = (u1 - u2) / np.sqrt(theta2)[:, None]

    out = _kernels.rk4_transition(F, theta1, theta_hat, w, policy.start, m.down1, m.down2)
    if policy.cap <= policy.start:
        return out

    rho0, mom0, en0 = _batch_moments(F, u1, theta1, m)
    scale = np.maximum.reduce(
        [
            np.max(np.abs(rho0), axis=-1),
            np.max(np.abs(mom0), axis=(1, 2)),
            np.max(np.abs(en0), axis=-1),
            np.full(B, 1e-300),
        ]
    )
    n = policy.start
    pending = np.arange(B)
    while True:
        _, mom1, en1 = _batch_moments(out[pending], u2[pending], theta2[pending], m)
        res = np.maximum(
            np.max(np.abs(mom1 - mom0[pending]), axis=(1, 2)),
            np.max(np.abs(en1 - en0[pending]), axis=-1),
        ) / scale[pending]
        bad = res > policy.residual_tol
        if not bad.any() or n >= policy.cap:
            break
        pending = pending[bad]
        n = min(2 * n, policy.cap)
        out[pending] = _kernels.rk4_transition(
            F[pending], theta1[pending], theta_hat[pending], w[pending], n, m.down1, m.down2
        )
    return out


def _batch_moments(F, u_frame, theta_frame, m):
    """Per-expansion (mass, momentum, energy) of a batch of stacks.

    F: (B, V, L) in frames u_frame (B, D), theta_frame (B,). Returns
    rho (B, V), momentum (B, V, D), energy (B, V). Mass is exactly invariant
    under the transition ODE, so defect checks only use the other two.
    """
    e_off = [m.unit_offset(d) for d in range(1, m.D + 1)]
    e2_off = [m.double_unit_offset(d) for d in range(1, m.D + 1)]
    rho = F[..., 0]  # (B, V)
    fe = F[..., e_off]  # (B, V, D)
    f2e = F[..., e2_off]
    mom = rho[..., None] * u_frame[:, None, :] + fe
    energy = (
        rho * np.sum(u_frame * u_frame, axis=-1)[:, None]
        + 2.0 * np.einsum("bd,bvd->bv", u_frame, fe)
        + m.D * theta_frame[:, None] * rho
        + 2.0 * f2e.sum(axis=-1)
    )
    return rho, mom, energy
