"""Discrete-velocity reference solver for 1-D BGK problems.

Entirely independent of the moment machinery: the distribution lives on a
fixed velocity grid, transport is first-order upwind, and the BGK relaxation
pulls toward the node-sampled Maxwellian (density-rescaled so discrete mass
is conserved exactly). For a three-dimensional velocity space the standard
reduction is used: the marginal in the flow axis, the transverse energy
marginal, and the two transverse momentum marginals, which close exactly for
BGK.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .solver import Mesh

__all__ = [
    "DvmGrid",
    "DvmField",
    "dvm_macro",
    "dvm_run",
    "dvm_write_snapshot",
    "VelocityDomainOverflow",
]


class VelocityDomainOverflow(RuntimeError):
    """Too much mass reached the edge of the velocity grid."""


@dataclass(frozen=True)
class DvmGrid:
    """Uniform velocity nodes with trapezoidal weights."""

    v_max: float
    n_v: int

    def __post_init__(self):
        if self.n_v < 8 or self.v_max <= 0:
            raise ValueError(f"bad velocity grid ({self.n_v} nodes, v_max={self.v_max})")

    @property
    def v(self) -> np.ndarray:
        return np.linspace(-self.v_max, self.v_max, self.n_v)

    @property
    def weights(self) -> np.ndarray:
        dv = 2.0 * self.v_max / (self.n_v - 1)
        w = np.full(self.n_v, dv)
        w[0] = w[-1] = 0.5 * dv
        return w


@dataclass
class DvmField:
    """Reduced distributions on (cells, velocity nodes)."""

    grid: DvmGrid
    g: np.ndarray  # mass marginal
    h: np.ndarray  # transverse energy marginal
    k2: np.ndarray  # transverse momentum marginals
    k3: np.ndarray


def dvm_macro(field: DvmField) -> dict:
    """Trapezoidal moments of the reduced pair: density, velocity (3
    components), temperature, heat flux along the axis."""
    w = field.grid.weights
    v = field.grid.v
    rho = field.g @ w
    if np.any(rho <= 0.0):
        raise RuntimeError("nonpositive discrete density")
    u1 = (field.g * v) @ w / rho
    u2 = field.k2 @ w / rho
    u3 = field.k3 @ w / rho
    e_total = (field.g * v * v) @ w + field.h @ w
    usq = u1**2 + u2**2 + u3**2
    theta = (e_total - rho * usq) / (3.0 * rho)
    if np.any(theta <= 0.0):
        raise RuntimeError("nonpositive discrete temperature")
    c = v[None, :] - u1[:, None]
    # transverse central energy: h - 2 u.k + |u_perp|^2 g, reduced in v
    h_c = (
        field.h
        - 2.0 * u2[:, None] * field.k2
        - 2.0 * u3[:, None] * field.k3
        + (u2**2 + u3**2)[:, None] * field.g
    )
    q1 = 0.5 * ((field.g * c**3) @ w + (h_c * c) @ w)
    u = np.stack([u1, u2, u3], axis=1)
    return {"rho": rho, "u": u, "theta": theta, "q1": q1}


def _maxwellian_reduced(grid: DvmGrid, rho, u, theta):
    """Node-sampled reduced Maxwellians, mass-matched by rescaling."""
    v = grid.v
    w = grid.weights
    u1 = u[:, 0]
    g = np.exp(-((v[None, :] - u1[:, None]) ** 2) / (2.0 * theta[:, None]))
    g *= (rho / np.sqrt(2.0 * math.pi * theta))[:, None]
    g *= (rho / (g @ w))[:, None]  # discrete-mass match
    h = (u[:, 1] ** 2 + u[:, 2] ** 2 + 2.0 * theta)[:, None] * g
    k2 = u[:, 1][:, None] * g
    k3 = u[:, 2][:, None] * g
    return g, h, k2, k3


def dvm_init(mesh: Mesh, grid: DvmGrid, macro_fn) -> DvmField:
    """Equilibrium initial data from macro_fn(x) -> (rho, u(3,), theta)."""
    centers = mesh.cell_centers()
    n = len(centers)
    rho = np.empty(n)
    u = np.empty((n, 3))
    theta = np.empty(n)
    for i, x in enumerate(centers):
        r, uu, th = macro_fn(x)
        rho[i], u[i], theta[i] = r, np.asarray(uu, dtype=float)[:3], th
    g, h, k2, k3 = _maxwellian_reduced(grid, rho, u, theta)
    return DvmField(grid=grid, g=g, h=h, k2=k2, k3=k3)


def _upwind_rhs(f, v_pos, dx, bc):
    """-v df/dx with first-order upwinding; f is (cells, nodes)."""
    if bc == "periodic":
        left = np.roll(f, 1, axis=0)
        right = np.roll(f, -1, axis=0)
    else:  # free: zero-gradient ghosts
        left = np.concatenate([f[:1], f[:-1]], axis=0)
        right = np.concatenate([f[1:], f[-1:]], axis=0)
    back = (f - left) / dx
    fwd = (right - f) / dx
    return np.where(v_pos[None, :], back, fwd)


def dvm_run(
    mesh: Mesh,
    macro_fn,
    kn: float,
    end_time: float,
    n_v: int = 64,
    v_max: float | None = None,
    cfl: float = 0.9,
    snapshot_dt: float = 0.0,
) -> list:
    """March the reduced BGK system to the end time.

    Returns [(t, macro dict), ...]; kn = inf turns collisions off. Raises
    VelocityDomainOverflow when more than 1e-8 of the mass sits on the
    extreme velocity nodes.
    """
    if mesh.N != 1:
        raise ValueError("the reference solver covers 1-D scenarios only")
    bc = mesh.bc[0]
    dx = float(mesh.dx[0])
    if v_max is None:
        centers = mesh.cell_centers()
        u_max = max(abs(float(np.asarray(macro_fn(x)[1])[0])) for x in centers)
        th_max = max(float(macro_fn(x)[2]) for x in centers)
        v_max = u_max + 6.0 * math.sqrt(2.0 * th_max)
    grid = DvmGrid(v_max=v_max, n_v=n_v)
    fld = dvm_init(mesh, grid, macro_fn)
    v = grid.v
    v_pos = v >= 0.0
    w = grid.weights

    t = 0.0
    out = [(0.0, dvm_macro(fld))]
    next_snap = snapshot_dt if snapshot_dt > 0 else math.inf
    while t < end_time * (1.0 - 1e-13):
        mac = dvm_macro(fld)
        nu = np.zeros_like(mac["rho"]) if math.isinf(kn) else mac["rho"] / kn
        dt = cfl * dx / v_max
        if nu.max() > 0.0:
            dt = min(dt, 0.5 / float(nu.max()))
        dt = min(dt, end_time - t, next_snap - t)

        # transport first, then relax toward the post-transport Maxwellian:
        # the density-rescaled target then conserves each cell's mass exactly
        for f in (fld.g, fld.h, fld.k2, fld.k3):
            f -= dt * v[None, :] * _upwind_rhs(f, v_pos, dx, bc)
        mac = dvm_macro(fld)
        nu = np.zeros_like(mac["rho"]) if math.isinf(kn) else mac["rho"] / kn
        g_m, h_m, k2_m, k3_m = _maxwellian_reduced(grid, mac["rho"], mac["u"], mac["theta"])
        relax = nu[:, None] * dt
        for f, f_m in ((fld.g, g_m), (fld.h, h_m), (fld.k2, k2_m), (fld.k3, k3_m)):
            f += relax * (f_m - f)
        t += dt
        if t >= next_snap * (1.0 - 1e-13):
            out.append((t, dvm_macro(fld)))
            next_snap += snapshot_dt

    total_mass = float((fld.g @ w).sum() * dx)
    edge_mass = float((np.abs(fld.g[:, 0]).sum() + np.abs(fld.g[:, -1]).sum()) * w[0] * dx)
    if edge_mass > 1e-8 * abs(total_mass):
        raise VelocityDomainOverflow(
            f"edge-node mass fraction {edge_mass / total_mass:.2e} exceeds 1e-8; "
            f"increase v_max (currently {v_max})"
        )
    if not out or out[-1][0] < end_time * (1.0 - 1e-13):
        out.append((t, dvm_macro(fld)))
    return out


def dvm_write_snapshot(mesh: Mesh, macro: dict, path) -> None:
    """Write one macro snapshot in the same CSV schema the moment solver
    uses, so the two solvers' outputs feed the same comparison tooling."""
    from .io import write_macro_snapshot

    n = len(macro["rho"])
    q = np.zeros((n, 3))
    q[:, 0] = macro["q1"]
    write_macro_snapshot(
        mesh.cell_centers(), macro["rho"], macro["u"], macro["theta"], q, path
    )
