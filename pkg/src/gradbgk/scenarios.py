"""The four reference experiments and the error norm.

Initial fields are cell-center samples of the stated macroscopic profiles as
local equilibria. The shock-bubble setup additionally needs a fully developed
1-D shock structure, which is computed by running the solver from the
Rankine-Hugoniot states until stationary and then shifting the whole slice's
frames to put the far field at rest.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .solver import Field, Mesh, RunConfig, Solver
from .state import GradState, maxwellian

__all__ = [
    "SCENARIO_NAMES",
    "ScenarioSpec",
    "init_shock_tube",
    "init_smooth_1d",
    "init_periodic_2d",
    "init_shock_bubble",
    "precompute_shock_profile",
    "rankine_hugoniot_states",
    "shift_frame",
    "error_norm",
    "build_scenario",
]

log = logging.getLogger(__name__)

SCENARIO_NAMES = ("shock_tube", "smooth_1d", "shock_bubble", "periodic_2d")

# shock-bubble domain: 2.5:1 aspect, shock entering at x = -1, bubble at (0.5, 0)
SHOCK_BUBBLE_LO = (-1.25, -0.5)
SHOCK_BUBBLE_HI = (1.25, 0.5)


@dataclass(frozen=True)
class ScenarioSpec:
    """A named experiment plus the parameters its initial field needs."""

    name: str
    nx: int
    ny: int = 0
    mach: float = 2.0
    shock_shift_mode: str = "consistent"  # or "printed": sqrt(5*mach/3)

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.name!r}; one of {SCENARIO_NAMES}")
        if self.shock_shift_mode not in ("consistent", "printed"):
            raise ValueError(f"unknown shock_shift_mode {self.shock_shift_mode!r}")

    @property
    def N(self) -> int:
        return 2 if self.name in ("shock_bubble", "periodic_2d") else 1

    def mesh(self) -> Mesh:
        if self.name in ("shock_tube", "smooth_1d"):
            bc = "free" if self.name == "shock_tube" else "periodic"
            return Mesh(lo=(-1.0,), hi=(1.0,), shape=(self.nx,), bc=(bc,))
        if self.name == "periodic_2d":
            return Mesh(
                lo=(-1.0, -1.0), hi=(1.0, 1.0), shape=(self.nx, self.ny or self.nx),
                bc=("periodic", "periodic"),
            )
        return Mesh(
            lo=SHOCK_BUBBLE_LO, hi=SHOCK_BUBBLE_HI,
            shape=(self.nx, self.ny or max(1, (self.nx * 2) // 5)),
            bc=("free", "free"),
        )

    def shift_speed(self) -> float:
        if self.shock_shift_mode == "printed":
            return math.sqrt(5.0 * self.mach / 3.0)
        return math.sqrt(5.0 / 3.0) * self.mach


def _equilibrium_field(mesh: Mesh, M: int, D: int, macro_fn) -> Field:
    def fn(x):
        rho, u, theta = macro_fn(x)
        return maxwellian(rho, np.asarray(u)[:D], theta, M, D)

    return Field.from_function(mesh, M, D, fn)


def shock_tube_macro(x) -> tuple:
    rho = 7.0 if x[0] < 0.0 else 1.0
    return rho, np.zeros(3), 1.0  # p = rho, so theta = 1 on both sides


def smooth_1d_macro(x) -> tuple:
    s = math.sin(math.pi * x[0])
    rho = 2.0 + 0.5 * math.cos(math.pi * x[0])
    u = np.array([1.0 + 0.5 * s, 0.5 * s, 0.0])
    return rho, u, 1.0 / rho  # p = 1


def periodic_2d_macro(x) -> tuple:
    s1, c1 = math.sin(math.pi * x[0]), math.cos(math.pi * x[0])
    s2, c2 = math.sin(math.pi * x[1]), math.cos(math.pi * x[1])
    rho = 2.0 + 0.5 * c1 + 0.5 * s2
    wave = 0.5 * s1 + 0.5 * c2
    u = np.array([1.0 + wave, wave, wave])
    return rho, u, 1.0 / rho  # p = 1


def init_shock_tube(mesh: Mesh, M: int, D: int) -> Field:
    if mesh.N != 1:
        raise ValueError("shock tube is a 1-D scenario")
    return _equilibrium_field(mesh, M, D, shock_tube_macro)


def init_smooth_1d(mesh: Mesh, M: int, D: int) -> Field:
    if mesh.N != 1 or mesh.bc[0] != "periodic":
        raise ValueError("smooth 1-D scenario needs a periodic 1-D mesh")
    if D < 2:
        raise ValueError("smooth 1-D scenario has a transverse velocity; D >= 2")
    return _equilibrium_field(mesh, M, D, smooth_1d_macro)


def init_periodic_2d(mesh: Mesh, M: int) -> Field:
    if mesh.N != 2 or mesh.bc != ("periodic", "periodic"):
        raise ValueError("periodic 2-D scenario needs a periodic 2-D mesh")
    return _equilibrium_field(mesh, M, 3, periodic_2d_macro)


def rankine_hugoniot_states(mach: float) -> tuple:
    """(rho, u, p) of the stationary-shock left/right states, D = 3."""
    if mach <= 1.0:
        raise ValueError(f"need a supersonic Mach number, got {mach}")
    rho_l = 4.0 * mach**2 / (mach**2 + 3.0)
    u_l = np.array([-math.sqrt(5.0 / 3.0) * (mach**2 + 3.0) / (4.0 * mach), 0.0, 0.0])
    p_l = (5.0 * mach**2 - 1.0) / 4.0
    rho_r = 1.0
    u_r = np.array([-math.sqrt(5.0 / 3.0) * mach, 0.0, 0.0])
    p_r = 1.0
    return (rho_l, u_l, p_l), (rho_r, u_r, p_r)


def shift_frame(state: GradState, s) -> GradState:
    """Translate the expansion center; coefficients and temperature stay."""
    return GradState(
        D=state.D, M=state.M, u=state.u + np.asarray(s, dtype=float),
        theta=state.theta, coeffs=state.coeffs, order=state.order,
    )


def precompute_shock_profile(
    mach: float,
    kn: float,
    mesh: Mesh,
    M: int,
    steady_tol: float = 1e-6,
    max_steps: int = 100_000,
    config: RunConfig | None = None,
) -> Field:
    """Run the 1-D solver from the Rankine-Hugoniot data to a stationary
    shock. Converged when the L1 rate of density change per unit time drops
    below `steady_tol`; raises if the step budget runs out first.

    The two outermost cells per side are held at the exact far states each
    step: the upstream gas keeps entering undisturbed and the downstream
    state cannot drain through the outflow boundary, so the far fields of
    the returned slice are exact. Note the captured shock retains a residual
    O(dx) drift speed, which floors the reachable rate on coarse meshes."""
    if mesh.N != 1:
        raise ValueError("the shock profile is one-dimensional")
    (rho_l, u_l, p_l), (rho_r, u_r, p_r) = rankine_hugoniot_states(mach)
    st_l = maxwellian(rho_l, u_l, p_l / rho_l, M, 3)
    st_r = maxwellian(rho_r, u_r, p_r / rho_r, M, 3)

    def macro(x):
        if x[0] < 0.0:
            return rho_l, u_l, p_l / rho_l
        return rho_r, u_r, p_r / rho_r

    field = _equilibrium_field(mesh, M, 3, macro)
    cfg = config or RunConfig(M=M, D=3, N=1, kn=kn, regularized=True)
    sol = Solver(mesh, cfg)
    vol = float(mesh.dx[0])
    idx = mesh.interior_index()

    def pin(f: Field) -> None:
        for pos, st in ((0, st_l), (1, st_l), (-2, st_r), (-1, st_r)):
            i = idx[pos]
            f.u[i] = st.u
            f.theta[i] = st.theta
            f.coef[i] = st.coeffs

    rho_prev = field.coef[idx, 0].copy()
    t = 0.0
    rate = math.inf
    for n in range(max_steps):
        field, dt = sol.step(field)
        pin(field)
        t += dt
        rho = field.coef[idx, 0]
        rate = float(np.sum(np.abs(rho - rho_prev)) * vol / dt)
        rho_prev = rho.copy()
        if n > 10 and rate < steady_tol:
            log.info("shock profile steady after %d steps (t=%.3g, rate=%.3g)", n + 1, t, rate)
            return field
    raise RuntimeError(
        f"shock profile not stationary within {max_steps} steps (last rate {rate:.3e})"
    )


def init_shock_bubble(
    mesh: Mesh,
    mach: float,
    kn: float,
    M: int,
    profile: Field | None = None,
    shift_mode: str = "consistent",
    profile_kwargs: dict | None = None,
) -> Field:
    """Travelling shock at x = -1 entering the bubble-perturbed ambient gas.

    The 1-D profile (precomputed here on a matching-resolution mesh unless
    given) is shifted to put the downstream gas at rest and extended
    constantly in y; elsewhere cells are bubble/ambient equilibria."""
    if mesh.N != 2:
        raise ValueError("shock-bubble is a 2-D scenario")
    spec = ScenarioSpec(name="shock_bubble", nx=8, mach=mach, shock_shift_mode=shift_mode)
    s = spec.shift_speed()
    if profile is None:
        n_1d = mesh.shape[0]
        pmesh = Mesh(lo=(-1.0,), hi=(1.0,), shape=(n_1d,), bc=("free",))
        profile = precompute_shock_profile(mach, kn, pmesh, M, **(profile_kwargs or {}))
    pmesh = profile.mesh
    pidx = pmesh.interior_index()
    px = pmesh.cell_centers()[:, 0]
    shock_x = -1.0  # front position in the 2-D domain

    (rho_l, u_l, p_l), _ = rankine_hugoniot_states(mach)

    def bubble_macro(x):
        r2 = (x[0] - 0.5) ** 2 + (x[1] - 0.0) ** 2
        rho = 1.0 + 1.5 * math.exp(-16.0 * r2)
        return rho, np.zeros(3), 1.0 / rho  # p = 1

    field = Field(mesh, M, 3)
    idx = mesh.interior_index()
    centers = mesh.cell_centers()
    lo_p, hi_p = px[0], px[-1]
    for pos, x in enumerate(centers):
        xr = x[0] - shock_x  # profile coordinate
        i = idx[pos]
        if xr < lo_p:
            st = maxwellian(rho_l, u_l + [s, 0, 0], p_l / rho_l, M, 3)
        elif xr > hi_p:
            rho, u, theta = bubble_macro(x)
            st = maxwellian(rho, u, theta, M, 3)
        else:
            k = int(np.argmin(np.abs(px - xr)))
            src = pidx[k]
            st = shift_frame(
                GradState(
                    D=3, M=M, u=profile.u[src], theta=profile.theta[src],
                    coeffs=profile.coef[src], order=M,
                ),
                [s, 0.0, 0.0],
            )
        field.u[i] = st.u
        field.theta[i] = st.theta
        field.coef[i] = st.coeffs
    return field


def _macro_quantity(field: Field, quantity: str) -> np.ndarray:
    rho, u, theta, q = field.macro_arrays()
    table = {"rho": rho, "theta": theta}
    for d in range(field.D):
        table[f"u{d+1}"] = u[:, d]
        table[f"q{d+1}"] = q[:, d]
    if quantity not in table:
        raise ValueError(f"unknown quantity {quantity!r}; one of {sorted(table)}")
    return table[quantity]


def error_norm(coarse: Field, reference: Field, quantity: str) -> float:
    """log10 of the L1 distance on the reference grid, the coarse solution
    read as piecewise constant. Identical fields give -inf ("exact")."""
    cs, rs = coarse.mesh.shape, reference.mesh.shape
    if len(cs) != len(rs):
        raise ValueError("snapshots have different dimensionality")
    ratios = []
    for c, r in zip(cs, rs):
        if r % c != 0:
            raise ValueError(f"reference grid {rs} is not a multiple of coarse {cs}")
        ratios.append(r // c)
    vals_c = _macro_quantity(coarse, quantity).reshape(cs)
    vals_r = _macro_quantity(reference, quantity).reshape(rs)
    for ax, r in enumerate(ratios):
        vals_c = np.repeat(vals_c, r, axis=ax)
    vol = float(np.prod(reference.mesh.dx))
    l1 = float(np.sum(np.abs(vals_c - vals_r)) * vol)
    if l1 == 0.0:
        return -math.inf
    return math.log10(l1)


def build_scenario(spec: ScenarioSpec, M: int, D: int, kn: float, **profile_kwargs):
    """Mesh + initial field for a named experiment."""
    mesh = spec.mesh()
    if spec.name == "shock_tube":
        return mesh, init_shock_tube(mesh, M, D)
    if spec.name == "smooth_1d":
        return mesh, init_smooth_1d(mesh, M, D)
    if spec.name == "periodic_2d":
        if D != 3:
            raise ValueError("periodic 2-D scenario needs D = 3")
        return mesh, init_periodic_2d(mesh, M)
    if D != 3:
        raise ValueError("shock-bubble scenario needs D = 3")
    return mesh, init_shock_bubble(
        mesh, spec.mach, kn, M, shift_mode=spec.shock_shift_mode,
        profile_kwargs=profile_kwargs or None,
    )
