"""Truncated Hermite expansion of the distribution function on one cell.

A GradState is a dense coefficient vector together with the frame (u, theta)
the expansion is centered and scaled by. A state is "normalized" when its
frame carries the actual bulk velocity and temperature, i.e. all first-order
coefficients vanish and the second-order trace is zero; convection breaks
this and `normalize` restores it by a conservative frame change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite_e

from .hermite import MultiIndexMap, he_eval, index_count, index_map

__all__ = [
    "GradState",
    "MacroState",
    "UnphysicalStateError",
    "maxwellian",
    "macro_from_raw",
    "quadrature_moment",
    "normalize",
]


class UnphysicalStateError(RuntimeError):
    """Raised when a state's solved density or temperature is nonpositive."""


@dataclass(frozen=True)
class MacroState:
    """Macroscopic fields extracted from one expansion."""

    rho: float
    u: np.ndarray
    theta: float
    q: np.ndarray
    q_complete: bool = True  # False when the storage order cannot hold all heat-flux terms


@dataclass(frozen=True)
class GradState:
    """Coefficient tensor of a truncated expansion plus its frame.

    `M` is the physical truncation order (>= 2); `order` the storage order,
    either M or M+1 (velocity-weighted terms live one order higher).
    """

    D: int
    M: int
    u: np.ndarray
    theta: float
    coeffs: np.ndarray
    order: int

    def __post_init__(self):
        u = np.array(self.u, dtype=float).reshape(self.D)
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "theta", float(self.theta))
        if self.M < 2:
            raise ValueError(f"truncation order must be >= 2, got {self.M}")
        if self.order not in (self.M, self.M + 1):
            raise ValueError(f"storage order {self.order} not in {{M, M+1}}")
        if self.theta <= 0.0:
            raise ValueError(f"frame temperature must be positive, got {self.theta}")
        if len(coeffs) != index_count(self.order, self.D):
            raise ValueError(
                f"coefficient length {len(coeffs)} != index_count({self.order}, {self.D})"
            )
        u.flags.writeable = False
        coeffs.flags.writeable = False

    @property
    def map(self) -> MultiIndexMap:
        return index_map(self.order, self.D)

    def coeff(self, alpha) -> float:
        return float(self.coeffs[self.map.offset(alpha)])

    def with_coeffs(self, coeffs) -> "GradState":
        return GradState(
            D=self.D, M=self.M, u=self.u, theta=self.theta, coeffs=coeffs, order=self.order
        )

    def is_normalized(self, tol: float = 1e-12) -> bool:
        """First-order coefficients and second-order trace vanish, relative
        to the density coefficient."""
        m = self.map
        scale = max(abs(float(self.coeffs[0])), 1e-300)
        fe = [abs(float(self.coeffs[m.unit_offset(d)])) for d in range(1, self.D + 1)]
        tr = abs(sum(float(self.coeffs[m.double_unit_offset(d)]) for d in range(1, self.D + 1)))
        return max(fe) <= tol * scale and tr <= tol * scale


def maxwellian(rho: float, u, theta: float, M: int, D: int, order: int | None = None) -> GradState:
    """Equilibrium state: a single density coefficient in its own frame."""
    if rho <= 0.0:
        raise ValueError(f"density must be positive, got {rho}")
    if theta <= 0.0:
        raise ValueError(f"temperature must be positive, got {theta}")
    order = M if order is None else order
    u = np.zeros(D) + np.asarray(u, dtype=float)
    coeffs = np.zeros(index_count(order, D))
    coeffs[0] = rho
    return GradState(D=D, M=M, u=u, theta=theta, coeffs=coeffs, order=order)


def macro_from_raw(state: GradState) -> MacroState:
    """Macroscopic (rho, u, theta, q) of a possibly unnormalized state.

    The frame (u', theta') generally differs from the true bulk fields once
    fluxes have been accumulated; the low-order coefficients carry exactly
    the correction. Heat flux uses the closed form
    q_j = 3 theta' f_{e_j} + 2 f_{3e_j} + sum_d f_{e_j + 2e_d}
    (terms beyond the storage order read as zero; `q_complete` flags when
    they all exist, which needs order >= 3).
    """
    m = state.map
    c = state.coeffs
    rho = float(c[0])
    if rho <= 0.0:
        raise UnphysicalStateError(f"nonpositive density {rho}")
    fe = np.array([c[m.unit_offset(d)] for d in range(1, state.D + 1)])
    f2e = np.array([c[m.double_unit_offset(d)] for d in range(1, state.D + 1)])
    u = state.u + fe / rho
    # rho|u|^2 + D rho theta = 2 rho u.u' - rho|u'|^2 + sum_d (theta' f_0 + 2 f_{2e_d})
    rhs = (
        2.0 * rho * float(u @ state.u)
        - rho * float(state.u @ state.u)
        + state.D * state.theta * rho
        + 2.0 * float(f2e.sum())
    )
    theta = (rhs - rho * float(u @ u)) / (state.D * rho)
    if theta <= 0.0:
        raise UnphysicalStateError(f"nonpositive temperature {theta}")

    q = np.zeros(state.D)
    complete = state.order >= 3
    for j in range(1, state.D + 1):
        qj = 3.0 * state.theta * float(c[m.unit_offset(j)])
        for d in range(1, state.D + 1):
            alpha = [0] * state.D
            alpha[j - 1] += 1
            alpha[d - 1] += 2
            if sum(alpha) <= state.order:
                qj += float(c[m.offset(tuple(alpha))])
                if d == j:  # f_{3e_j} enters with total weight 3
                    qj += 2.0 * float(c[m.offset(tuple(alpha))])
        q[j - 1] = qj
    return MacroState(rho=rho, u=u, theta=theta, q=q, q_complete=complete)


def _monomials(p, D: int) -> dict:
    if isinstance(p, dict):
        out = {}
        for gamma, cval in p.items():
            gamma = tuple(int(g) for g in gamma)
            if len(gamma) != D or min(gamma) < 0:
                raise ValueError(f"bad monomial exponent {gamma} for D={D}")
            out[gamma] = out.get(gamma, 0.0) + float(cval)
        return out
    return {tuple(int(g) for g in p): 1.0}


def quadrature_moment(state: GradState, p) -> float:
    """Integral of p(xi) against the expansion, by Gauss-Hermite quadrature
    in the state's own frame.

    `p` is a monomial exponent tuple or a {exponents: coefficient} dict of
    total degree at most the storage order; with order+1 nodes per dimension
    the quadrature is exact for such integrands.
    """
    mono = _monomials(p, state.D)
    deg = max(sum(g) for g in mono)
    # one degree above the storage order is still exactly integrable (needed
    # for the xi_j-weighted moment identities)
    if deg > state.order + 1:
        raise ValueError(f"polynomial degree {deg} exceeds storage order {state.order} + 1")
    n_nodes = state.order + 2
    x, wts = hermite_e.hermegauss(n_nodes)
    m = state.map
    sqt = math.sqrt(state.theta)
    norm = (2.0 * math.pi) ** -0.5

    # per-dimension table G[d][r, a] = (2 pi)^(-1/2) * sum_i w_i (u_d + sqrt(theta) x_i)^r He_a(x_i)
    max_pow = max(max(g) for g in mono)
    he_vals = np.stack([he_eval(a, x) for a in range(state.order + 1)])  # (K+1, n)
    G = []
    for d in range(state.D):
        xi_d = state.u[d] + sqt * x
        pows = np.stack([xi_d**r for r in range(max_pow + 1)])  # (max_pow+1, n)
        G.append(norm * np.einsum("rn,an,n->ra", pows, he_vals, wts))

    orders = m.orders()
    weights = state.coeffs * state.theta ** (-0.5 * orders)
    total = 0.0
    for gamma, cval in mono.items():
        prod = np.ones(len(m))
        for d in range(state.D):
            prod *= G[d][gamma[d], m.indices[:, d]]
        total += cval * float(weights @ prod)
    return total


def normalize(state: GradState, policy=None) -> GradState:
    """Project the state into the frame carrying its own bulk fields.

    The result satisfies the first-order/trace constraints and keeps every
    monomial moment of degree <= order. Idempotent up to the projection
    tolerance.
    """
    from .projection import DEFAULT_POLICY, project  # deferred: projection imports GradState

    policy = DEFAULT_POLICY if policy is None else policy
    out = state
    for _ in range(3):
        mac = macro_from_raw(out)
        du = np.max(np.abs(mac.u - out.u))
        dtheta = abs(mac.theta - out.theta)
        if du <= 1e-14 * max(1.0, float(np.max(np.abs(out.u)))) and dtheta <= 1e-14 * out.theta:
            break
        out = project(out, mac.u, mac.theta, out.order, policy)
    return out
