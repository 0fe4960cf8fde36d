import cmath
import math

import numpy as np
import pytest

from ordzero.arith import big
from ordzero.errors import TruncationFailure
from ordzero.products import (Schedule, TruncationPolicy, eval_Pn, eval_Pn_deriv, eval_Q,
                              eval_Q_deriv, eval_Qn, lattice_root, log_Pn, log_Q)

from oracles import brute_P, brute_P_deriv, brute_Q, brute_Q_deriv


def test_Q_at_zero_is_one():
    v, tail = eval_Q(0)
    assert v == 1
    assert tail >= 0


def test_Q_vanishes_exactly_at_node():
    assert eval_Q(8.0)[0] == 0


def test_Q_at_minus_two_matches_brute_force():
    ref = brute_Q(-2, terms=64)
    v, tail = eval_Q(-2)
    assert abs(v - ref) <= 1e-12 * abs(ref)
    assert abs(v.real - 4.7685) < 1e-4
    assert tail < 1e-12


def test_Qn_skips_its_own_factor():
    ref = brute_Q(2, terms=60, skip=1)
    assert abs(eval_Qn(1, 2.0) - ref) < 1e-13
    assert abs(eval_Qn(1, 2.0) - 0.2887880951) < 1e-10
    assert eval_Qn(2, 8.0) == 0
    assert eval_Qn(5, 0) == 1


def test_Q_derivative_at_nodes_and_zero():
    assert abs(eval_Q_deriv(2.0) - (-0.5 * eval_Qn(1, 2.0))) < 1e-15
    assert abs(eval_Q_deriv(2.0) - (-0.14439)) < 1e-5
    assert abs(eval_Q_deriv(0) + 1) < 1e-14
    for m in range(1, 7):
        d = eval_Q_deriv(float(2**m))
        assert abs(abs(d) - 2.0**-m * abs(eval_Qn(m, float(2**m)))) <= 1e-14 * abs(d)
        assert abs(d + 2.0**-m * eval_Qn(m, float(2**m))) <= 1e-14 * abs(d)


@pytest.mark.parametrize("w", [0.3 + 0.2j, -5 + 1j, 17.5 - 3j, 100j])
def test_Q_derivative_matches_mp_differentiation(w):
    ref = brute_Q_deriv(w)
    assert abs(eval_Q_deriv(w) - ref) <= 1e-12 * max(1.0, abs(ref))


def test_truncation_failure_when_cap_too_small():
    pol = TruncationPolicy(eps=1e-15, max_terms=20)
    with pytest.raises(TruncationFailure):
        eval_Q(2.0**10, pol)


def test_policy_rejects_bad_parameters():
    with pytest.raises(ValueError):
        TruncationPolicy(eps=0)
    with pytest.raises(ValueError):
        TruncationPolicy(max_terms=4)


def test_Pn_small_cases():
    s2 = Schedule.from_sequences([2], [1])
    assert eval_Pn(s2, 2, 0) == -1
    assert eval_Pn_deriv(s2, 2, 1.0) == 2
    assert eval_Pn_deriv(s2, 2, -1.0) == -2
    s3 = Schedule.from_sequences([3], [1])
    assert abs(eval_Pn(s3, 2, 2.0) - 7) < 1e-13
    assert abs(eval_Pn(s3, 2, 2.0) - brute_P(3, 1, 2.0)) < 1e-13


def test_Pn_vanishes_at_every_lattice_root(show_schedule):
    s = show_schedule
    for n in s.levels:
        p = s.period(n)
        for j in range(1, s.rate(n) + 1):
            for ell in range(p):
                assert eval_Pn(s, n, lattice_root(j, ell, p)) == 0


def test_Pn_against_brute_product(show_schedule):
    s = show_schedule
    rng = np.random.default_rng(3)
    for n in s.levels:
        for z in rng.normal(size=4) + 1j * rng.normal(size=4):
            ref = brute_P(s.period(n), s.rate(n), z)
            assert abs(eval_Pn(s, n, z) - ref) <= 1e-12 * abs(ref)


def test_Pn_derivative_rotation_covariance(show_schedule):
    s = show_schedule
    rng = np.random.default_rng(11)
    for n in s.levels:
        p = s.period(n)
        j = int(rng.integers(1, s.rate(n) + 1))
        base = eval_Pn_deriv(s, n, lattice_root(j, 0, p))
        for ell in range(p):
            d = eval_Pn_deriv(s, n, lattice_root(j, ell, p))
            want = cmath.exp(-2j * math.pi * ell / p) * base
            assert abs(d - want) <= 1e-12 * abs(base)


def test_Pn_derivative_matches_central_difference(show_schedule):
    s = show_schedule
    rng = np.random.default_rng(5)
    h = 1e-6
    for _ in range(20):
        n = int(rng.choice(list(s.levels)))
        z = complex(rng.normal(), rng.normal()) * 0.8
        fd = (eval_Pn(s, n, z + h) - eval_Pn(s, n, z - h)) / (2 * h)
        d = eval_Pn_deriv(s, n, z)
        assert abs(d - fd) <= 1e-6 * abs(d)
        assert abs(d - brute_P_deriv(s.period(n), s.rate(n), z)) <= 1e-11 * abs(d)


def test_big_float_backend_agrees_with_double():
    ar = big(200)
    for w in (-2, 3.5 + 1j, 100):
        v, _ = eval_Q(w)
        vb, _ = eval_Q(w, arith=ar)
        assert abs(complex(vb) - v) <= 1e-14 * abs(v)
        assert abs(complex(eval_Q_deriv(w, arith=ar)) - eval_Q_deriv(w)) <= 1e-13 * abs(eval_Q_deriv(w))


def test_scaled_products_survive_outside_double_range():
    s = Schedule.from_sequences([30], [40])
    z = np.array([2.0, 3.0])
    val = log_Pn(s, 2, z)
    # 1200 factors of modulus about 2-3 overflow a raw double product
    assert np.all(np.isfinite(val.real)) and np.all(val.real > 700)
    ref = sum(math.log(abs(2.0 - complex(r))) for r in
              [cmath.exp(2j * math.pi * l / 30) / j for j in range(1, 41) for l in range(30)])
    assert abs(val.real[0] - ref) < 1e-9 * ref


def test_log_Q_matches_value():
    w = np.array([-3.0, 5 + 2j, 40j])
    lq = log_Q(w)
    v = np.array([eval_Q(x)[0] for x in w])
    assert np.allclose(np.exp(lq), v, rtol=1e-12)


def test_schedule_normalization_records_both_rate_lists():
    s = Schedule.from_sequences([4, 8, 4], [2, 2, 4])
    assert s.original_rates == (2, 2, 4)
    assert s.rates == (2, 2, 7)
    assert s.degrees == (6, 10, 11)
    assert s.exponents == (37, 101, 122)
    assert all(e > d * d for e, d in zip(s.exponents, s.degrees))
    # as written (before raising m_n) the lattice would have 8+16+16 points
    assert sum(m * p for m, p in zip(s.original_rates, s.periods)) == 40
    assert sum(s.lattice_sizes) == 52


def test_schedule_rejects_inconsistent_input():
    with pytest.raises(ValueError):
        Schedule.from_sequences([2, 3], [1])
    with pytest.raises(ValueError):
        Schedule((4, 2), (2, 2))
    with pytest.raises(ValueError):
        Schedule.from_sequences([0], [1])
