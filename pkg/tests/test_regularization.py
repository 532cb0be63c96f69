import math

import numpy as np
import pytest

from gradbgk.flux import xi_multiply
from gradbgk.hermite import index_count, index_map
from gradbgk.projection import SubstepPolicy, project
from gradbgk.regularization import (
    CellContext,
    RegBlock,
    build_reg_block,
    gradient_reconstruct,
    reg_flux,
    time_term,
)
from gradbgk.state import GradState, maxwellian

def test_gradient_reconstruct_values():
    for mode in ("central", "van_leer"):
        assert gradient_reconstruct(0.7, 0.7, mode) == pytest.approx(0.7, rel=1e-15)
    assert gradient_reconstruct(1.0, -1.0, "van_leer") == 0.0
    assert gradient_reconstruct(1.0, 3.0, "central") == pytest.approx(2.0)
    assert gradient_reconstruct(1.0, 3.0, "van_leer") == pytest.approx(1.5)
    assert gradient_reconstruct(0.0, 0.0, "van_leer") == 0.0
    with pytest.raises(ValueError):
        gradient_reconstruct(1.0, 2.0, "superbee")


def test_van_leer_bounded_and_sign(rng):
    d1 = rng.normal(size=300)
    d2 = rng.normal(size=300)
    out = gradient_reconstruct(d1, d2, "van_leer")
    assert np.all(np.abs(out) <= np.maximum(np.abs(d1), np.abs(d2)) + 1e-15)
    same = np.sign(d1) == np.sign(d2)
    assert np.all(np.sign(out[same]) == np.sign(d1[same]))


def _context(M=3, D=1, dt=0.1, **overrides):
    L = index_count(M, D)
    L1 = index_count(M + 1, D)
    base = dict(
        D=D,
        M=M,
        u_n=np.zeros(D),
        theta_n=1.0,
        coeffs_n=np.zeros(L),
        u_next=np.zeros(D),
        theta_next=1.0,
        own_products=np.zeros((1, L1)),
        nbr_products_plus=np.zeros((1, L1)),
        nbr_products_minus=np.zeros((1, L1)),
        dt=dt,
        dx=np.array([0.1]),
        nu=2.0,
    )
    base.update(overrides)
    return CellContext(**base)


def test_time_term_cases():
    steady = _context()
    assert time_term(steady) == pytest.approx([0.0], abs=0)
    jump = _context(u_next=np.array([0.05]))
    assert time_term(jump) == pytest.approx([0.5], rel=1e-14)
    printed = _context(
        u_n=np.array([1.0]), theta_n=4.0, u_next=np.array([1.0]), theta_next=1.0
    )
    assert time_term(printed) == pytest.approx([10.0], rel=1e-14)


def test_build_reg_block_uniform_equilibrium_is_zero():
    st = maxwellian(1.0, [0.0], 1.0, 3, 1)
    prod = xi_multiply(st, 1).coeffs[None, :]
    ctx = _context(
        coeffs_n=np.asarray(st.coeffs),
        own_products=prod,
        nbr_products_plus=prod.copy(),
        nbr_products_minus=prod.copy(),
    )
    blk = build_reg_block(ctx, "central")
    assert np.all(blk.block == 0.0)


def test_build_reg_block_requires_m3():
    ctx = _context()
    object.__setattr__(ctx, "M", 2)
    with pytest.raises(ValueError):
        build_reg_block(ctx, "central")


def test_build_reg_block_matches_direct_formula(rng):
    # 1-D Maxwellians with linear u(x), frozen frames: compare against a
    # per-index re-evaluation of the correction formula
    M, D = 3, 1
    dx = 0.1
    nu = 1.7
    pol = SubstepPolicy(start=16, cap=16, residual_tol=0.0)
    mid = maxwellian(1.3, [0.2], 1.1, M, D)
    left = maxwellian(1.3, [0.1], 1.1, M, D)
    right = maxwellian(1.3, [0.3], 1.1, M, D)
    own = xi_multiply(mid, 1)
    proj_p = project(xi_multiply(right, 1), mid.u, mid.theta, M + 1, pol)
    proj_m = project(xi_multiply(left, 1), mid.u, mid.theta, M + 1, pol)
    u_next = np.array([0.21])
    th_next = 1.09
    ctx = CellContext(
        D=D, M=M, u_n=mid.u, theta_n=mid.theta, coeffs_n=np.asarray(mid.coeffs),
        u_next=u_next, theta_next=th_next,
        own_products=own.coeffs[None, :],
        nbr_products_plus=proj_p.coeffs[None, :],
        nbr_products_minus=proj_m.coeffs[None, :],
        dt=0.05, dx=np.array([dx]), nu=nu,
    )
    got = build_reg_block(ctx, "van_leer")

    m1 = index_map(M + 1, D)
    c = (math.sqrt(mid.theta / th_next) * u_next[0] - mid.u[0]) / 0.05
    src = {m1.alpha(off): np.asarray(mid.coeffs)[off] if off < len(mid.coeffs) else 0.0
           for off in range(len(m1))}
    grade = [off for off in range(len(m1)) if sum(m1.alpha(off)) == M + 1]
    for k, off in enumerate(grade):
        a = m1.alpha(off)
        d1 = (proj_p.coeffs[off] - own.coeffs[off]) / dx
        d2 = (own.coeffs[off] - proj_m.coeffs[off]) / dx
        dd = (abs(d1) * d2 + abs(d2) * d1) / (abs(d1) + abs(d2)) if abs(d1) + abs(d2) > 0 else 0.0
        lower = (a[0] - 1,)
        want = -(dd + c * src.get(lower, 0.0)) / nu
        assert got.block[k] == pytest.approx(want, rel=1e-13, abs=1e-15)


def test_build_reg_block_scales_inversely_with_nu(rng):
    M, D = 3, 1
    L1 = index_count(M + 1, D)
    prods = rng.normal(size=(3, 1, L1))
    coeffs = rng.normal(size=index_count(M, D))
    coeffs[0] = 1.0
    common = dict(
        coeffs_n=coeffs,
        own_products=prods[0],
        nbr_products_plus=prods[1],
        nbr_products_minus=prods[2],
        u_next=np.array([0.03]),
        theta_next=1.02,
    )
    b1 = build_reg_block(_context(nu=2.0, **common), "central")
    b2 = build_reg_block(_context(nu=4.0, **common), "central")
    assert b2.block == pytest.approx(0.5 * b1.block, rel=1e-14)


def test_reg_flux_zero_blocks():
    M, D = 3, 2
    Lb = index_count(M + 1, D) - index_count(M, D)
    z = RegBlock(D=D, M=M, u=np.zeros(D), theta=1.0, block=np.zeros(Lb))
    out = reg_flux(z, z, 1, -1.0, 1.0, np.zeros(D), 1.0)
    assert np.all(out.coeffs == 0.0)


def test_reg_flux_supersonic_and_blended_single_entry():
    M, D = 3, 1
    m1 = index_map(M + 1, D)
    Lb = index_count(M + 1, D) - index_count(M, D)
    val = 0.37
    blk = np.zeros(Lb)
    blk[0] = val  # the single alpha = (4,) entry
    left = RegBlock(D=D, M=M, u=np.zeros(D), theta=1.0, block=blk)
    right = RegBlock(D=D, M=M, u=np.zeros(D), theta=1.0, block=np.zeros(Lb))
    m = index_map(M, D)
    off3 = m.offset((3,))
    # supersonic left: only the left one-sided product appears
    out = reg_flux(left, right, 1, 0.5, 2.0, np.zeros(D), 1.0)
    assert out.coeffs[off3] == pytest.approx(4.0 * val, rel=1e-15)  # (alpha_j+1) = 4
    # supersonic right: left block invisible
    out = reg_flux(left, right, 1, -2.0, -0.5, np.zeros(D), 1.0)
    assert np.all(out.coeffs == 0.0)
    # blended
    lam_l, lam_r = -1.0, 3.0
    out = reg_flux(left, right, 1, lam_l, lam_r, np.zeros(D), 1.0)
    want = lam_r * 4.0 * val / (lam_r - lam_l)
    assert out.coeffs[off3] == pytest.approx(want, rel=1e-14)
    # increment never touches orders <= 2
    assert np.all(out.coeffs[: index_count(2, D)] == 0.0)


def test_top_grade_coefficients_survive_any_projection(rng):
    # an expansion whose only nonzero coefficients sit at |alpha| = M keeps
    # them bitwise under any frame change
    D, M = 2, 3
    m = index_map(M, D)
    coeffs = np.zeros(len(m))
    gM = m.grade_slice(M)
    coeffs[gM] = rng.normal(size=gM.stop - gM.start)
    st = GradState(D=D, M=M, u=[0.3, -0.4], theta=1.2, coeffs=coeffs, order=M)
    out = project(
        st, [0.9, 0.1], 0.7, policy=SubstepPolicy(start=3, cap=3, residual_tol=0.0)
    )
    np.testing.assert_array_equal(out.coeffs, st.coeffs)


def test_reg_block_linearity_around_background(rng):
    # frozen frames: the block is linear in coefficient perturbations
    M, D = 4, 1
    L1 = index_count(M + 1, D)
    base = rng.normal(size=(3, 1, L1)) * 0.1
    pert = rng.normal(size=(3, 1, L1)) * 0.1
    coeffs = np.zeros(index_count(M, D))
    coeffs[0] = 1.0

    def block(scale):
        ctx = _context(
            M=M,
            coeffs_n=coeffs,
            own_products=base[0] + scale * pert[0],
            nbr_products_plus=base[1] + scale * pert[1],
            nbr_products_minus=base[2] + scale * pert[2],
        )
        return build_reg_block(ctx, "central").block

    b0, b1, b2 = block(0.0), block(1.0), block(2.0)
    assert b2 - b1 == pytest.approx(b1 - b0, rel=1e-12, abs=1e-14)
