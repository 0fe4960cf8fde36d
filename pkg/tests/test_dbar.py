import math

import mpmath
import numpy as np
import pytest

from ordzero.dbar import (CutoffSpec, DbarConfig, Grid, I_majorant, ModelMap, assemble_f,
                          build_cutoff, build_problem, cauchy_transform, certificate, dbar_adj,
                          dbar_op, growth_certificate, solve_min_norm, weighted_norm)
from ordzero.errors import GridTooCoarse, NoConvergence

SMALL = DbarConfig(grid_n=256, box_half_width=16.0, box_center=0.0, k_max=3)


@pytest.fixture(scope="module")
def small():
    prob = build_problem(SMALL, J=(3,), M=9.0)
    alpha, info = solve_min_norm(prob)
    return prob, alpha, info


def test_adjoint_identity():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(20, 24)) + 1j * rng.normal(size=(20, 24))
    m = rng.normal(size=(20, 24)) + 1j * rng.normal(size=(20, 24))
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = 0
    lhs = np.vdot(m, dbar_op(a, 0.3))
    rhs = np.vdot(dbar_adj(m, 0.3), a)
    assert abs(lhs - rhs) < 1e-12 * abs(lhs)


def test_stencil_kills_discrete_holomorphic_fields():
    g = Grid.from_config(SMALL)
    for f in (np.ones_like(g.Z), g.Z, g.Z**2):
        assert np.max(np.abs(dbar_op(f, g.h))) < 1e-9
    out = dbar_op(np.conj(g.Z), g.h)
    assert np.allclose(out[1:-1, 1:-1], 1.0)


def test_cutoff_profile_and_constant():
    c = build_cutoff(range(2, 6))
    # max smoothstep' = 15/8 over an annulus of width 2^{k-3}, times 2^k
    assert abs(c.A - 15.0) < 1e-6
    for k in (2, 4):
        ctr = 2.0**k
        assert c.chi(ctr + 0.99 * CutoffSpec.inner(k)) == 1.0
        assert c.chi(ctr + 1.01 * CutoffSpec.outer(k) * 1j) == 0.0
    with pytest.raises(ValueError):
        build_cutoff([1, 2])


def test_analytic_dbar_chi_matches_stencil_to_second_order():
    c = build_cutoff([3])
    errs = []
    for n in (256, 512, 1024):
        g = Grid.from_config(DbarConfig(grid_n=n, box_half_width=16.0, box_center=0.0))
        num = dbar_op(c.chi(g.Z), g.h)
        errs.append(np.max(np.abs(num[1:-1, 1:-1] - c.dbar_chi(g.Z)[1:-1, 1:-1])))
    # pre-asymptotic: the observed order climbs toward 2 as h shrinks
    rates = [errs[i] / errs[i + 1] for i in range(2)]
    assert errs[0] < 0.05 * 15 / 16
    assert 2.8 < rates[0] < rates[1] < 4.5


def test_rhs_support_is_the_annulus(small):
    prob, _, _ = small
    rho = np.abs(prob.grid.Z - 8.0)
    nz = np.abs(prob.g) > 0
    assert nz.any()
    assert np.all((rho[nz] > 1.0) & (rho[nz] < 2.0))


def test_model_bound():
    with pytest.raises(ValueError):
        ModelMap((3, 4), 10.0)
    assert ModelMap((4, 3), 9.0).J == (3, 4)


def test_coarse_annulus_rejected():
    with pytest.raises(GridTooCoarse):
        build_problem(SMALL, J=(2,), M=4.0)
    with pytest.raises(GridTooCoarse):
        build_problem(DbarConfig(grid_n=256, box_half_width=4.0, box_center=0.0, k_max=3),
                      J=(3,), M=9.0)


def test_zero_data_gives_zero_solution():
    prob = build_problem(SMALL, J=(), M=0.0)
    alpha, info = solve_min_norm(prob)
    assert not np.any(alpha) and info.iterations == 0


def test_solution_meets_constraint(small):
    prob, alpha, info = small
    inside = np.zeros(prob.g.shape, bool)
    inside[1:-1, 1:-1] = True
    res = np.linalg.norm(np.where(inside, dbar_op(alpha, prob.grid.h) - prob.g, 0))
    assert res / np.linalg.norm(prob.g[inside]) <= SMALL.cg_tol
    assert info.residual <= SMALL.cg_tol


def test_minimality_against_null_directions(small):
    prob, alpha, _ = small
    h = prob.grid.h
    Z = prob.grid.Z
    base = weighted_norm(alpha, prob.W, h)
    scale = math.sqrt(base)
    for beta in (np.ones_like(Z), 1j * np.ones_like(Z), Z, Z**2):
        assert np.max(np.abs(dbar_op(beta, h))) < 1e-9
        for eps in (1e-3, -1e-3):
            step = eps * scale * beta / math.sqrt(weighted_norm(beta, prob.W, h))
            assert weighted_norm(alpha + step, prob.W, h) >= base * (1 - 1e-9)


def test_solution_is_linear_in_the_data(small):
    prob, alpha, _ = small
    half = build_problem(SMALL, J=(3,), M=4.5)
    a2, _ = solve_min_norm(half)
    assert np.max(np.abs(2 * a2 - alpha)) <= 1e-6 * np.max(np.abs(alpha))


def test_iteration_cap_raises(small):
    prob, _, _ = small
    with pytest.raises(NoConvergence) as info:
        solve_min_norm(prob, cg_max_iter=5, polish_rounds=0)
    assert info.value.residual > SMALL.cg_tol


def test_cauchy_transform_of_gaussian():
    # T[e^{-|w|^2}](z) = (1 - e^{-|z|^2}) / z
    g = Grid.from_config(DbarConfig(grid_n=256, box_half_width=8.0, box_center=0.0))
    Z = g.Z
    T = cauchy_transform(np.exp(-np.abs(Z) ** 2), g.h)
    probe = (np.abs(Z) > 0.5) & (np.abs(Z) < 4)
    ref = (1 - np.exp(-np.abs(Z[probe]) ** 2)) / Z[probe]
    assert np.max(np.abs(T[probe] - ref)) < 5e-3


def test_certificate_on_small_grid(small):
    prob, alpha, info = small
    cert = certificate(assemble_f(prob, alpha, info))
    assert cert["hormander_lhs"] <= cert["hormander_rhs"]
    assert cert["hormander_slack"] == 0
    assert max(cert["interpolation_errors"]) <= 1e-3 * 9.0
    assert cert["min_norm_not_above_cauchy"]
    assert cert["cauchy_projected_residual"] <= 1e-6
    assert cert["cutoff_A"] == pytest.approx(15.0)
    assert cert["I_diagnostic"] <= cert["I_majorant"]


def test_growth_circles_must_fit(small):
    prob, alpha, info = small
    sol = assemble_f(prob, alpha, info)
    with pytest.raises(ValueError):
        growth_certificate(sol, radii=(1, 40))
    assert max(growth_certificate(sol)["radii"]) <= 16


def test_I_majorant_series():
    ref = float(15.0**2 * 3 * mpmath.pi / 64
                * mpmath.nsum(lambda k: k**4 * mpmath.exp(-(k - 1) ** 2), [1, mpmath.inf]))
    assert abs(I_majorant(15.0, 1.0) - ref) < 1e-10 * ref


def test_cutoff_constant_is_scale_invariant():
    As = [build_cutoff([k]).A for k in range(2, 6)]
    assert max(As) <= 1.1 * min(As)


@pytest.mark.parametrize("J,M", [((3,), 9.0), ((4,), 16.0), ((3, 4), 9.0)])
def test_I_diagnostic_below_majorant(J, M):
    prob = build_problem(DbarConfig(), J, M)
    h = prob.grid.h
    diag = float(np.sum(np.abs(prob.g) ** 2 * prob.ew) * h * h)
    C = DbarConfig().potential_C
    assert 0 < diag <= I_majorant(prob.cutoff.A, C)
    # per-annulus form: |g| <= A 2^-k M / 2 and the annulus has area 3 pi 4^{k-3}
    bound = sum(prob.cutoff.A**2 * 2.0 ** (-2 * k) * M**2 * math.exp(-C * (k - 1) ** 2)
                * 3 * math.pi * 4.0 ** (k - 3) for k in J)
    assert diag <= bound


def test_solution_is_additive_in_the_data():
    cfg = DbarConfig(grid_n=256, box_half_width=32.0, box_center=24.0, k_min=4, k_max=5)
    sols = {J: solve_min_norm(build_problem(cfg, J, 16.0))[0] for J in ((4,), (5,), (4, 5))}
    both = sols[(4, 5)]
    assert np.max(np.abs(both - sols[(4,)] - sols[(5,)])) <= 1e-6 * np.max(np.abs(both))


def test_growth_envelope_dominates(small):
    prob, alpha, info = small
    g = growth_certificate(assemble_f(prob, alpha, info))
    logs = np.log(g["max_abs_f"])
    env = g["c_fit"] * np.log(np.asarray(g["radii"]) + 1.0) ** 2 + g["const_fit"]
    assert math.isfinite(g["c_fit"]) and np.all(env >= logs - 1e-12 * (1 + np.abs(logs)))


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="alpha is pinned only at the nodes 2^k, so |f| = |alpha| "
                                        "inside |z| < 2^{k_min} - 2^{k_min-2} is not driven to "
                                        "the interpolation scale; see the decisions ledger")
def test_f_is_small_inside_the_first_annulus(dbar_full):
    sol, cert, _ = dbar_full
    g = cert["growth"]
    assert g["radii"][0] == 1
    assert g["max_abs_f"][0] <= 1e-3 * cert["M"]


def test_dbar_f_residual_is_stencil_truncation(small):
    # dbar f = D(chi h) - g exactly, so what remains is the stencil error on chi h
    prob, alpha, info = small
    sol = assemble_f(prob, alpha, info)
    h = prob.grid.h
    chi_h = prob.cutoff.chi(prob.grid.Z, prob.model.J) * prob.model.M
    inside = np.zeros(prob.g.shape, bool)
    inside[1:-1, 1:-1] = True
    lhs = np.where(inside, dbar_op(sol.f, h), 0)
    rhs = np.where(inside, dbar_op(chi_h, h) - prob.g, 0)
    assert np.linalg.norm(lhs - rhs) <= 1e-7 * np.linalg.norm(prob.g)


@pytest.mark.xfail(strict=True, reason="analytic dbar(chi) right-hand side leaves O(h^2) "
                                        "stencil error in dbar f; see the decisions ledger")
def test_dbar_f_within_solver_tolerance(small):
    prob, alpha, info = small
    cert = certificate(assemble_f(prob, alpha, info), cauchy=False)
    assert cert["dbar_f_relative"] <= SMALL.cg_tol
