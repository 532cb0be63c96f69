import math

import mpmath
import numpy as np
import pytest

from gradbgk.hermite import (
    MultiIndex,
    basis_eval,
    he_eval,
    he_roots,
    index_count,
    index_map,
)


def test_he_eval_low_degrees():
    assert he_eval(0, 7.3) == 1.0
    assert he_eval(2, 2.0) == pytest.approx(3.0, abs=0)
    assert he_eval(3, 1.5) == pytest.approx(-1.125, abs=0)


def test_he_eval_differential_relation():
    # He_n'(x) = n He_{n-1}(x), checked by central differences
    xs = np.linspace(-10.0, 10.0, 100)
    h = 1e-6
    for n in range(1, 21):
        num = (he_eval(n, xs + h) - he_eval(n, xs - h)) / (2 * h)
        exact = n * he_eval(n - 1, xs)
        scale = np.maximum(np.abs(exact), np.max(np.abs(exact)) * 1e-6)
        assert np.max(np.abs(num - exact) / scale) < 1e-6


def test_he_roots_trivial():
    assert he_roots(1).roots == pytest.approx([0.0], abs=1e-14)
    assert he_roots(2).roots == pytest.approx([-1.0, 1.0], abs=1e-12)
    t = he_roots(3)
    assert t.x_max == pytest.approx(math.sqrt(3.0), abs=1e-12)
    assert t.x_min == pytest.approx(-math.sqrt(3.0), abs=1e-12)


def test_he_roots_against_dense_eigensolve():
    # independent oracle: dense symmetric Jacobi matrix, no Newton polish
    n = 5
    jac = np.diag(np.sqrt(np.arange(1.0, n)), 1) + np.diag(np.sqrt(np.arange(1.0, n)), -1)
    oracle = np.sort(np.linalg.eigvalsh(jac))
    assert he_roots(n).roots == pytest.approx(oracle, abs=1e-12)


@pytest.mark.parametrize("n", range(1, 21))
def test_he_roots_residual_and_symmetry(n):
    r = he_roots(n).roots
    assert np.all(np.diff(r) > 0)
    # "r is a zero of He_n to 1e-10": bound the Newton correction
    # He_n(r) / (n He_{n-1}(r)), the distance to the true zero, evaluated in
    # high precision. (The raw value |He_n(r)| is slope-amplified by ~1e9 at
    # the extreme roots for n near 20 and cannot resolve 1e-10 in double.)
    with mpmath.workdps(50):
        for x in r:
            x = mpmath.mpf(x)
            he_n = mpmath.hermite(n, x / mpmath.sqrt(2)) / mpmath.mpf(2) ** (mpmath.mpf(n) / 2)
            if n == 1:
                dist = he_n
            else:
                he_prev = mpmath.hermite(n - 1, x / mpmath.sqrt(2)) / mpmath.mpf(2) ** (
                    mpmath.mpf(n - 1) / 2
                )
                dist = he_n / (n * he_prev)
            assert abs(float(dist)) < 1e-10
    if n <= 9:  # below the slope blow-up the plain value bound is meaningful
        assert np.max(np.abs(he_eval(n, r))) < 1e-10
    assert np.max(np.abs(r + r[::-1])) < 1e-12


def test_index_count_values():
    assert index_count(3, 3) == 20
    assert index_count(6, 3) == 84
    for D in (1, 2, 3):
        assert index_count(0, D) == 1


@pytest.mark.parametrize("D", [1, 2, 3])
@pytest.mark.parametrize("K", range(0, 11))
def test_index_map_roundtrip_and_count(K, D):
    m = index_map(K, D)
    assert len(m) == index_count(K, D)
    for off in range(len(m)):
        a = m.alpha(off)
        assert sum(a) <= K
        assert m.offset(a) == off
    # graded: orders nondecreasing, truncation is a prefix
    orders = m.orders()
    assert np.all(np.diff(orders) >= 0)
    if K > 0:
        sub = index_map(K - 1, D)
        assert np.array_equal(sub.indices, m.indices[: len(sub)])


def test_index_map_shift_tables():
    m = index_map(4, 3)
    for off in range(len(m)):
        a = list(m.alpha(off))
        for d in range(3):
            for table, shift in ((m.down1, -1), (m.down2, -2), (m.up1, +1)):
                b = a.copy()
                b[d] += shift
                tgt = table[d, off]
                if min(b) < 0 or sum(b) > 4:
                    assert tgt == -1
                else:
                    assert m.alpha(tgt) == tuple(b)


def test_basis_eval_trivial():
    assert basis_eval(1.0, (0,), [0.0]) == pytest.approx((2 * math.pi) ** -0.5, rel=1e-14)
    assert basis_eval(1.0, (1,), [0.0]) == 0.0


def test_basis_eval_high_precision_oracle():
    # arbitrary-precision re-evaluation of the product formula
    theta, alpha, v = 4.0, (0, 0, 0), (1.0, 0.0, 0.0)
    got = basis_eval(theta, alpha, v)
    with mpmath.workdps(50):
        want = mpmath.mpf(1)
        for a_d, v_d in zip(alpha, v):
            assert a_d == 0  # He_0 = 1
            want *= (2 * mpmath.pi) ** mpmath.mpf(-0.5)
            want *= mpmath.mpf(theta) ** (-(a_d + 1) / mpmath.mpf(2))
            want *= mpmath.e ** (-mpmath.mpf(v_d) ** 2 / 2)
        want = float(want)
    assert got == pytest.approx(want, rel=1e-14)


def test_basis_eval_nontrivial_alpha_oracle():
    theta, alpha, v = 2.5, (2, 1, 3), (0.7, -0.3, 1.2)
    got = basis_eval(theta, alpha, v)
    with mpmath.workdps(50):
        want = mpmath.mpf(1)
        for a_d, v_d in zip(alpha, v):
            x = mpmath.mpf(v_d)
            he = mpmath.hermite(a_d, x / mpmath.sqrt(2)) / mpmath.mpf(2) ** (
                mpmath.mpf(a_d) / 2
            )  # He_n(x) = 2^(-n/2) H_n(x/sqrt 2)
            want *= (
                (2 * mpmath.pi) ** mpmath.mpf(-0.5)
                * mpmath.mpf(theta) ** (-(a_d + 1) / mpmath.mpf(2))
                * he
                * mpmath.e ** (-x**2 / 2)
            )
        want = float(want)
    assert got == pytest.approx(want, rel=1e-13)


def test_multi_index_helpers():
    e2 = MultiIndex.unit(2, 3)
    assert e2.components == (0, 1, 0)
    assert e2.order == 1
    with pytest.raises(ValueError):
        MultiIndex((1, -1))
