import cmath
import math

import mpmath
import pytest

import ordzero.dynamics as dyn
from ordzero.cs_builder import build_cs, lattice_slope, zero_lattice
from ordzero.dispatcher import build_dispatchers
from ordzero.dynamics import (MapF, assemble_F, assemble_single_period, closed_form_det,
                              count_ppp, count_report, iterate, prod_root_identity, verify_ppp)
from ordzero.errors import (OrbitResidualTooLarge, Overflow, PrimitivityFailure,
                            TruncationFailure)
from ordzero.products import Schedule, eval_Q

from oracles import brute_P_deriv, brute_Q, brute_Q_deriv


def test_lattice_points_rotate(show_F):
    s = show_F.cs.schedule
    for pt in zero_lattice(show_F.cs):
        z, w = show_F(pt.z, pt.w)
        om = cmath.exp(2j * math.pi / s.period(pt.n))
        assert abs(z - om * pt.z) < 1e-14
        assert w == pt.w


def test_second_component_is_g2_plus_w(show_F):
    for z, w in ((0.2 + 1j, 3.0 - 2j), (5.0, -0.5j), (-1j, 17.0)):
        _, f2 = show_F(z, w)
        assert abs(f2 - (eval_Q(w, terms=show_F.terms_for(w))[0] + w)) <= 1e-13 * abs(f2)


def test_no_dispatchers_means_no_rotation(show_cs):
    F = assemble_F(show_cs)
    for pt in zero_lattice(show_cs)[:6]:
        assert F(pt.z, pt.w) == (0, pt.w)


def test_dispatcher_levels_must_match(show_cs, small_schedule):
    with pytest.raises(ValueError):
        assemble_F(show_cs, build_dispatchers(small_schedule))
    with pytest.raises(ValueError):
        assemble_F(show_cs, build_dispatchers(show_cs.schedule)[:1])


def test_single_period_divisibility(show_cs):
    F4 = assemble_single_period(show_cs, 4)
    assert dyn.level_period(F4, 3) == 4
    F3 = assemble_single_period(show_cs, 3)
    with pytest.raises(ValueError):
        dyn.level_period(F3, 2)
    with pytest.raises(ValueError):
        assemble_single_period(show_cs, 0)


def test_single_period_one_fixes_the_lattice(show_cs):
    F1 = assemble_single_period(show_cs, 1)
    for pt in zero_lattice(show_cs):
        assert F1(pt.z, pt.w) == (pt.z, pt.w)


def test_iterate_counts(small_F):
    pt = [q for q in zero_lattice(small_F.cs) if q.n == 3][0]
    x = (pt.z, pt.w)
    assert iterate(small_F, x, 0) == x
    for k in (3, 6):
        z, w = iterate(small_F, x, k)
        assert abs(z - pt.z) < 1e-13 and w == pt.w
    z, _ = iterate(small_F, x, 1)
    assert abs(z - pt.z) > 1
    with pytest.raises(ValueError):
        iterate(small_F, x, -1)


def test_iterate_reports_conditioning(small_F):
    pt = zero_lattice(small_F.cs)[0]
    _, cond = iterate(small_F, (pt.z, pt.w), 2, return_conditioning=True)
    assert cond > 0 and math.isfinite(cond)


def test_iterate_overflow_is_typed(show_F):
    with pytest.raises(Overflow):
        iterate(show_F, (1.0, 1e6), 20, terms=120)
    with pytest.raises(TruncationFailure):
        iterate(show_F, (1.0, 1e150), 1)


@pytest.mark.parametrize("a,p", [(0.5, 3), (-0.25 + 0.1j, 5), (1e-30, 8), (2.0, 4)])
def test_prod_root_identity(a, p):
    got = prod_root_identity(a, p)
    with mpmath.workdps(400):
        want = 1 - (-mpmath.mpc(a)) ** p
        # the difference from one keeps its relative accuracy however small a is
        assert abs((got - 1) - (want - 1)) <= 1e-20 * abs(want - 1)


def test_closed_form_det_values():
    assert closed_form_det(0.5, 1.0, 2) == -(0.25) * 3
    assert closed_form_det(0.1, 0.0, 3) == 0


def test_lattice_slope_against_brute_products(small_F):
    s = small_F.cs.schedule
    for n in s.levels:
        p, ell = s.period(n), s.exponent(n)
        a = lattice_slope(small_F.cs, n, 1, terms=80)
        ref = 2.0**-ell * brute_Q(2**n, skip=n) * brute_P_deriv(p, s.rate(n), 1.0)
        assert abs(a - ref) <= 1e-12 * abs(ref)


def test_verified_margins_match_independent_closed_form(small_F):
    rep = count_report(small_F)
    assert rep.ok
    s = small_F.cs.schedule
    for lvl in rep.levels:
        n, p = lvl.n, lvl.period
        dq = brute_Q_deriv(2**n)
        a = 2.0**-s.exponent(n) * brute_Q(2**n, skip=n) * brute_P_deriv(p, s.rate(n), 1.0)
        want = p * math.log2(abs(a)) + math.log2(abs((1 + dq) ** p - 1))
        for rec in lvl.records:
            assert abs(rec.jacobian_log_margin - want) < 1e-9 * abs(want)
            assert abs(rec.chain_log_margin - want) <= 1e-3 * abs(want)
            assert abs(rec.fd_log_margin - want) <= 1e-3 * abs(want)
            assert rec.orbit_residual <= 1e-10
            for got, exp in zip(rec.primitivity_margins, rec.primitivity_expected):
                assert abs(got - exp) < 1e-12


def test_counts_at_radius_edges(small_F):
    rep = count_report(small_F)
    recs = [r for l in rep.levels for r in l.records]
    assert count_ppp(recs, 2, 0.0) == 0
    assert count_ppp(recs, 5, 1e9) == 0
    assert count_ppp(recs, 2, 5.0) == 2
    # lattice points of level n sit just outside the ball of radius 2^n
    assert all(l.count_at_2n == 0 for l in rep.levels)
    assert rep.to_dict()["total_verified"] == 5


def test_wrong_rotation_fails_the_orbit_check(small_schedule):
    cs = build_cs(small_schedule)
    F = assemble_F(cs, build_dispatchers(small_schedule, scale=1.1))
    with pytest.raises(OrbitResidualTooLarge) as info:
        verify_ppp(F, 2, newton=False)
    assert info.value.point is not None
    with pytest.raises(OrbitResidualTooLarge):
        verify_ppp(F, 2, newton=True)


def test_claiming_a_multiple_period_fails_primitivity(small_F, monkeypatch):
    orig = dyn.level_period
    monkeypatch.setattr(dyn, "level_period", lambda F, n: 2 * orig(F, n))
    with pytest.raises(PrimitivityFailure):
        verify_ppp(small_F, 2)


def test_unrefined_records_still_verify(small_F):
    recs = verify_ppp(small_F, 3, newton=False)
    assert len(recs) == 3 and not any(r.newton_refined for r in recs)


@pytest.mark.parametrize("a,p,want", [(0.0, 5, 1.0), (1.0, 2, 0.0), (2.0, 3, 9.0)])
def test_prod_root_small_cases(a, p, want):
    assert abs(complex(prod_root_identity(a, p)) - want) < 1e-15


def test_single_period_four_on_the_showcase_lattice(show_cs):
    F4 = assemble_single_period(show_cs, 4)
    recs = verify_ppp(F4, 2)
    assert len(recs) == 8
    for r in recs:
        assert r.period == 4 and r.orbit_residual <= 1e-10
        assert all(m > 0.5 for m in r.primitivity_margins)


def test_first_level_of_showcase_counts(show_F):
    recs = verify_ppp(show_F, 2)
    assert count_ppp(recs, 4, 2.0**2 + 1) == 8 >= show_F.cs.schedule.rate(2)
    z, w = recs[0].point.z, recs[0].point.w
    assert abs(iterate(show_F, (z, w), 8)[0] - z) <= 2e-10
