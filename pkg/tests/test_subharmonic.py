import math

import numpy as np
import pytest

from ordzero.errors import QuadratureUnderresolved, SubharmonicityViolation
from ordzero.subharmonic import (NEG_INF, BasePotential, circle_max, estimate_c, green_kernel,
                                 green_potential, poisson_integral, puncture, puncture_bounds,
                                 puncture_strength, ring_laplacian, verify_subharmonic)

N = 1024
T = 2 * np.pi * np.arange(N) / N


@pytest.fixture(scope="module")
def base():
    return BasePotential()


@pytest.fixture(scope="module")
def punctured(base):
    return puncture(base, range(2, 7))


def test_poisson_reproduces_harmonic_polynomials():
    f = np.cos(3 * T) + 0.5 * np.sin(T) + 2.0  # Re(zeta^3) + Im(zeta)/2 + 2
    for x in (0.0, 0.3 + 0.4j, -0.7j):
        want = (x**3).real + 0.5 * x.imag + 2.0 if x else 2.0
        assert abs(poisson_integral(f, x) - want) < 1e-12


def test_poisson_of_constants_and_real_part():
    for x in (0.0, 0.5, -0.2 + 0.6j):
        assert abs(poisson_integral(np.ones(N), x) - 1.0) < 1e-13
        assert abs(poisson_integral(np.cos(T), x) - x.real) < 1e-13


def test_green_potential_of_zero_laplacian():
    assert green_potential(0.0, 0.3j) == 0.0


def test_poisson_guards():
    with pytest.raises(ValueError):
        poisson_integral(np.ones(128), 0.1)
    with pytest.raises(ValueError):
        poisson_integral(np.ones(N), 1.0)
    with pytest.raises(QuadratureUnderresolved):
        poisson_integral(np.ones(N), 0.99)


def test_green_kernel_sign_and_boundary():
    w = 0.4 - 0.2j
    assert green_kernel(0.1 + 0.1j, w) < 0
    assert abs(green_kernel(np.exp(1.3j), w)) < 1e-14


@pytest.mark.parametrize("x", [0.0, 0.3 + 0.2j, -0.6 + 0.5j])
def test_green_potential_solves_poisson_problems(x):
    # u = |w|^2 - 1 and u = |w|^4 - 1 vanish on the circle
    assert abs(green_potential(4.0, x) - (abs(x) ** 2 - 1)) < 1e-9
    got = green_potential(lambda w: 16 * np.abs(w) ** 2, x)
    assert abs(got - (abs(x) ** 4 - 1)) < 1e-9


def test_c_is_one_half():
    # the Poisson kernel is harmonic in y, so its area integral is pi
    assert abs(estimate_c() - 0.5) < 1e-10
    assert abs(estimate_c(128) - estimate_c(64)) < 1e-12


def test_base_potential_pieces(base):
    C = base.C
    assert abs(C - 1024.0) < 1e-6
    assert abs(base(1.5) - C * math.log(1.5)) < 1e-9
    assert abs(base(-5j) - C * math.log(5) ** 2) < 1e-9
    r = 2.5
    assert abs(base(r) - C * max(math.log(r), math.log(r) ** 2)) < 1e-9
    with pytest.raises(ValueError):
        BasePotential(0.0)


def test_base_laplacian_against_ring_stencil(base):
    pts = np.array([5.0 + 1j, -7.0 + 3j, 0.5 + 0.5j, 20j])
    fd = ring_laplacian(base, pts, 1e-3)
    assert np.allclose(fd, base.laplacian(pts), rtol=1e-5, atol=1e-3)
    # 2C / r^2 outside |z| = 3, zero inside |z| < 2
    assert abs(base.laplacian(5.0) - 2 * base.C / 25) < 1e-9
    assert base.laplacian(1.0 + 0.5j) == 0


def test_ring_stencil_is_exact_on_harmonic_polynomials():
    f = lambda z: np.real(z**5 - 3 * z**2)
    pts = np.array([0.3 + 0.1j, 2.0 - 1j])
    assert np.max(np.abs(ring_laplacian(f, pts, 0.1))) < 1e-8


def test_strength_formula(base):
    k = 4
    r = 2.0 ** (k - 3)
    assert abs(puncture_strength(base, k) - 0.5 * r * r * 2 * base.C / (16 + r) ** 2) < 1e-9
    with pytest.raises(ValueError):
        puncture_strength(base, 1)


def test_punctured_equals_base_outside_disks(base, punctured):
    rng = np.random.default_rng(0)
    z = rng.uniform(-80, 80, 400) + 1j * rng.uniform(-80, 80, 400)
    out = punctured.disk_index(z) < 0
    assert np.array_equal(punctured(z[out]), base(z[out]))


def test_centers_are_minus_infinity(punctured):
    for d in punctured.disks:
        assert punctured(d.center) == NEG_INF
        assert punctured.is_puncture(d.center)


def test_continuity_across_boundary(base, punctured):
    for d in punctured.disks:
        z = d.center + d.radius * (1 - 1e-9) * np.exp(1j * T[::16])
        assert np.max(np.abs(punctured(z) - base(z))) < 1e-5 * base.C


def test_inside_is_below_base(base, punctured):
    for d in punctured.disks:
        z = d.center + 0.5 * d.radius * np.exp(1j * T[::16])
        assert np.all(punctured(z) < base(z))


def test_bounds_hold(punctured):
    rows = puncture_bounds(punctured)
    assert len(rows) == 3 * len(punctured.disks)
    assert all(r["ok"] for r in rows)


def test_base_is_subharmonic(base):
    rep = verify_subharmonic(base)
    assert rep.ok and rep.seams == []


def test_punctured_is_subharmonic(punctured):
    rep = verify_subharmonic(punctured)
    assert rep.ok
    assert all(s["max_jump"] <= s["tol"] for s in rep.seams)
    assert {g.name for g in rep.grids} >= {"global", "disk k=2", "disk k=6"}


def test_overstrong_punctures_are_rejected(punctured):
    strong = punctured.with_strengths(1e6)
    with pytest.raises(SubharmonicityViolation) as info:
        verify_subharmonic(strong)
    assert info.value.points
    rep = verify_subharmonic(strong, raise_on_fail=False)
    assert not rep.ok


def test_circle_max_of_linear_function():
    assert abs(circle_max(np.real, 2.0, 3.0) - 5.0) < 1e-12
