import math

import numpy as np
import pytest

from gradbgk.scenarios import (
    ScenarioSpec,
    build_scenario,
    error_norm,
    init_periodic_2d,
    init_shock_bubble,
    init_shock_tube,
    init_smooth_1d,
    precompute_shock_profile,
    rankine_hugoniot_states,
    shift_frame,
)
from gradbgk.solver import Mesh, RunConfig
from gradbgk.state import macro_from_raw, maxwellian


def test_shock_tube_initial_states():
    mesh = Mesh(lo=(-1.0,), hi=(1.0,), shape=(8,), bc=("free",))
    f = init_shock_tube(mesh, M=3, D=3)
    idx = mesh.interior_index()
    xs = mesh.cell_centers()[:, 0]
    for pos, x in enumerate(xs):
        st = f.cell_state(pos)
        want_rho = 7.0 if x < 0 else 1.0
        assert st.coeffs[0] == want_rho
        assert st.theta == 1.0
        assert np.all(st.u == 0.0)
        assert np.all(st.coeffs[1:] == 0.0)  # equilibrium
    assert f.totals()["mass"] == pytest.approx(8.0, rel=1e-14)


def test_smooth_1d_samples():
    mesh = Mesh(lo=(-1.0,), hi=(1.0,), shape=(4,), bc=("periodic",))
    f = init_smooth_1d(mesh, M=3, D=3)
    xs = mesh.cell_centers()[:, 0]
    # centers are -0.75, -0.25, 0.25, 0.75; check the formulas directly
    for pos, x in enumerate(xs):
        st = f.cell_state(pos)
        rho = 2.0 + 0.5 * math.cos(math.pi * x)
        s = 0.5 * math.sin(math.pi * x)
        assert st.coeffs[0] == pytest.approx(rho, rel=1e-14)
        assert st.u == pytest.approx([1.0 + s, s, 0.0], rel=1e-14)
        assert st.theta == pytest.approx(1.0 / rho, rel=1e-14)


def test_smooth_1d_point_values_from_profile():
    # the stated profile at x = 0 and x = 0.5
    from gradbgk.scenarios import smooth_1d_macro

    r0, u0, t0 = smooth_1d_macro([0.0])
    assert (r0, t0) == (2.5, pytest.approx(0.4))
    assert u0 == pytest.approx([1.0, 0.0, 0.0])
    r5, u5, t5 = smooth_1d_macro([0.5])
    assert (r5, t5) == (2.0, pytest.approx(0.5))
    assert u5 == pytest.approx([1.5, 0.5, 0.0])
    xs = np.linspace(-1, 1, 101)
    rhos = [smooth_1d_macro([x])[0] for x in xs]
    assert min(rhos) >= 1.5 and max(rhos) <= 2.5


def test_periodic_2d_samples():
    from gradbgk.scenarios import periodic_2d_macro

    r, u, t = periodic_2d_macro([0.0, 0.0])
    assert r == pytest.approx(2.5)
    assert u == pytest.approx([1.5, 0.5, 0.5])
    assert t == pytest.approx(0.4)
    # u2 = u3 everywhere; rho within [1, 3]
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.uniform(-1, 1, size=2)
        r, u, t = periodic_2d_macro(x)
        assert u[1] == u[2]
        assert 1.0 <= r <= 3.0


def test_rankine_hugoniot_mach2():
    (rho_l, u_l, p_l), (rho_r, u_r, p_r) = rankine_hugoniot_states(2.0)
    assert rho_l == pytest.approx(16.0 / 7.0, rel=1e-14)
    assert u_l[0] == pytest.approx(-math.sqrt(5.0 / 3.0) * 7.0 / 8.0, rel=1e-14)
    assert p_l == pytest.approx(19.0 / 4.0, rel=1e-14)
    assert (rho_r, p_r) == (1.0, 1.0)
    # equal mass flux: the jump is stationary
    assert rho_l * u_l[0] == pytest.approx(rho_r * u_r[0], rel=1e-12)


def test_shift_frame():
    st = maxwellian(2.0, [0.3, 0.0, 0.0], 1.4, 3, 3)
    same = shift_frame(st, [0.0, 0.0, 0.0])
    assert np.array_equal(same.u, st.u)
    shifted = shift_frame(st, [1.0, -0.5, 0.0])
    mac = macro_from_raw(shifted)
    assert mac.u == pytest.approx([1.3, -0.5, 0.0], rel=1e-14)
    assert mac.rho == 2.0
    assert mac.theta == pytest.approx(1.4)
    assert np.array_equal(shifted.coeffs, st.coeffs)


def test_shock_profile_far_field_is_fixed_point():
    # before any wave reaches them, constant-state cells stay put exactly
    from gradbgk.solver import Solver

    mesh = Mesh(lo=(-1.0,), hi=(1.0,), shape=(40,), bc=("free",))
    (rho_l, u_l, p_l), (rho_r, u_r, p_r) = rankine_hugoniot_states(2.0)

    def macro(x):
        return (rho_l, u_l, p_l / rho_l) if x[0] < 0 else (rho_r, u_r, p_r / rho_r)

    from gradbgk.scenarios import _equilibrium_field

    f = _equilibrium_field(mesh, 3, 3, macro)
    sol = Solver(mesh, RunConfig(M=3, D=3, N=1, kn=0.1, regularized=True))
    idx = mesh.interior_index()
    first, last = f.coef[idx[0]].copy(), f.coef[idx[-1]].copy()
    for _ in range(3):
        f, _dt = sol.step(f)
    assert np.max(np.abs(f.coef[idx[0]] - first)) < 1e-13
    assert np.max(np.abs(f.coef[idx[-1]] - last)) < 1e-13


@pytest.mark.slow
def test_shock_profile_converged_flux_constancy():
    # a Mach the 80-cell mesh resolves: the steady point-value mass flux is
    # then constant through the whole layer
    mach, kn = 1.4, 0.1
    mesh = Mesh(lo=(-1.0,), hi=(1.0,), shape=(80,), bc=("free",))
    prof = precompute_shock_profile(mach, kn, mesh, M=3, steady_tol=3e-3)
    idx = mesh.interior_index()
    (rho_l, u_l, p_l), (rho_r, u_r, p_r) = rankine_hugoniot_states(mach)
    # pinned far fields: exact Rankine-Hugoniot states
    assert prof.coef[idx[0], 0] == pytest.approx(rho_l, rel=1e-12)
    assert prof.coef[idx[-1], 0] == pytest.approx(rho_r, rel=1e-12)
    # mass flux constant through the converged profile to 1%
    rho, u, theta, q = prof.macro_arrays()
    flux = rho * u[:, 0]
    assert np.max(np.abs(flux - flux.mean())) / abs(flux.mean()) < 0.01
    # density transitions monotonically between the two states
    assert rho.min() >= rho_r - 1e-6 and rho.max() <= rho_l + 1e-6


@pytest.mark.slow
def test_shock_bubble_embedding():
    mesh = Mesh(lo=(-1.0,), hi=(1.0,), shape=(50,), bc=("free",))
    prof = precompute_shock_profile(2.0, 0.1, mesh, M=3, steady_tol=5e-2)
    bmesh = Mesh(lo=(-1.25, -0.5), hi=(1.25, 0.5), shape=(50, 20), bc=("free", "free"))
    f = init_shock_bubble(bmesh, 2.0, 0.1, 3, profile=prof)
    centers = bmesh.cell_centers()
    rho2, u2, theta2, _ = f.macro_arrays()
    # bubble center cell
    k = int(np.argmin(np.sum((centers - [0.5, 0.0]) ** 2, axis=1)))
    r2 = float(np.sum((centers[k] - [0.5, 0.0]) ** 2))
    want = 1.0 + 1.5 * math.exp(-16.0 * r2)
    assert rho2[k] == pytest.approx(want, rel=1e-12)
    assert theta2[k] == pytest.approx(1.0 / want, rel=1e-12)
    # far corner: ambient at rest (up to the bubble's Gaussian tail)
    k = int(np.argmin(np.sum((centers - [1.2, 0.45]) ** 2, axis=1)))
    r2 = float(np.sum((centers[k] - [0.5, 0.0]) ** 2))
    assert rho2[k] == pytest.approx(1.0 + 1.5 * math.exp(-16.0 * r2), rel=1e-12)
    assert rho2[k] == pytest.approx(1.0, abs=1e-4)
    assert u2[k, 0] == 0.0
    # y-symmetry of the initial field
    ny = bmesh.shape[1]
    rho_grid = rho2.reshape(bmesh.shape)
    assert np.max(np.abs(rho_grid - rho_grid[:, ::-1])) < 1e-12


def test_error_norm_identical_and_constant_offset():
    mesh = Mesh(lo=(-1.0, -1.0), hi=(1.0, 1.0), shape=(4, 4), bc=("periodic", "periodic"))
    f = init_periodic_2d(mesh, M=3)
    assert error_norm(f, f, "rho") == -math.inf
    g = f.copy()
    idx = mesh.interior_index()
    g.coef[idx, 0] += 0.25
    # domain area 4, offset c: E = log10(4 c)
    assert error_norm(g, f, "rho") == pytest.approx(math.log10(4 * 0.25), abs=1e-12)


def test_error_norm_grid_mismatch():
    m1 = Mesh(lo=(-1.0,), hi=(1.0,), shape=(4,), bc=("periodic",))
    m2 = Mesh(lo=(-1.0,), hi=(1.0,), shape=(6,), bc=("periodic",))
    f1 = init_smooth_1d(m1, 3, 3)
    f2 = init_smooth_1d(m2, 3, 3)
    with pytest.raises(ValueError):
        error_norm(f1, f2, "rho")


def test_error_norm_metric_properties():
    m_c = Mesh(lo=(-1.0,), hi=(1.0,), shape=(4,), bc=("periodic",))
    m_r = Mesh(lo=(-1.0,), hi=(1.0,), shape=(8,), bc=("periodic",))
    a = init_smooth_1d(m_c, 3, 3)
    ref = init_smooth_1d(m_r, 3, 3)
    b = a.copy()
    idx = m_c.interior_index()
    b.coef[idx, 0] *= 1.03
    # symmetry on a common grid
    assert error_norm(a, b, "rho") == pytest.approx(error_norm(b, a, "rho"), abs=1e-12)
    # triangle inequality on the linear scale
    d_ab = 10 ** error_norm(a, b, "rho")
    d_ar = 10 ** error_norm(a, ref, "rho")
    d_br = 10 ** error_norm(b, ref, "rho")
    assert d_ar <= d_ab + d_br + 1e-12


def test_scenario_spec_validation_and_build():
    with pytest.raises(ValueError):
        ScenarioSpec(name="weird", nx=8)
    spec = ScenarioSpec(name="smooth_1d", nx=16)
    mesh, field = build_scenario(spec, M=3, D=3, kn=0.1)
    assert mesh.shape == (16,)
    assert field.totals()["mass"] > 0
    spec2 = ScenarioSpec(name="periodic_2d", nx=6, ny=6)
    mesh2, field2 = build_scenario(spec2, M=3, D=3, kn=0.1)
    assert mesh2.N == 2


def test_shift_speed_modes():
    spec_c = ScenarioSpec(name="shock_bubble", nx=8, mach=2.0, shock_shift_mode="consistent")
    spec_p = ScenarioSpec(name="shock_bubble", nx=8, mach=2.0, shock_shift_mode="printed")
    # consistent mode cancels the downstream velocity exactly
    (rl, ul, pl), (rr, ur, pr) = rankine_hugoniot_states(2.0)
    assert ur[0] + spec_c.shift_speed() == pytest.approx(0.0, abs=1e-14)
    assert spec_p.shift_speed() == pytest.approx(math.sqrt(5.0 * 2.0 / 3.0), rel=1e-14)


def test_initial_fields_are_equilibria():
    # every scenario initializer produces normalized local equilibria
    cases = [
        (ScenarioSpec(name="shock_tube", nx=8), 3),
        (ScenarioSpec(name="smooth_1d", nx=8), 3),
        (ScenarioSpec(name="periodic_2d", nx=4, ny=4), 3),
    ]
    for spec, D in cases:
        mesh, field = build_scenario(spec, M=3, D=D, kn=0.1)
        idx = mesh.interior_index()
        assert np.all(field.coef[idx, 1:] == 0.0)
        for pos in range(len(idx)):
            assert field.cell_state(pos).is_normalized()
