"""The symmetrized Cornalba-Shiffman map G = (g1, g2).

    g1(z, w) = sum_n 2^{-l_n} Q_n(w) P_n(z)
    g2(z, w) = Q(w)

G vanishes on every lattice point (e^{2 pi i l/p_n}/j, 2^n): the n-th term
dies through P_n, every other term through the factor j=n of Q_nu, and g2
through Q(2^n) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .arith import DOUBLE, arith_for
from .errors import PrecisionOverflow
from .products import (DEFAULT_POLICY, LatticePoint, Schedule, TruncationPolicy,
                       _radius, complex_logsumexp, lattice_root, leave_one_out_sum,
                       level_roots, log_Pn, log_Q)

DOUBLE_MAX_EXPONENT = 960
DEFAULT_BIG_BITS = 512
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class CSFunction:
    schedule: Schedule
    policy: TruncationPolicy = DEFAULT_POLICY
    arith: object = DOUBLE
    roots: dict = field(default_factory=dict, repr=False, compare=False)
    coeffs: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def precision_bits(self) -> int:
        return self.arith.bits

    def at_precision(self, bits: int | None) -> "CSFunction":
        """Same map evaluated with another backend (``None`` for double)."""
        return build_cs(self.schedule, self.policy, bits)

    def terms_for(self, w) -> int:
        # one index for values and derivatives of the same truncated map
        return self.policy.terms_for(max(_radius(w), 1.0))


def build_cs(schedule: Schedule, policy: TruncationPolicy = DEFAULT_POLICY,
             precision_bits: int | None = None) -> CSFunction:
    arith = arith_for(precision_bits)
    if not arith.is_big:
        for n, ell in zip(schedule.levels, schedule.exponents):
            if ell > DOUBLE_MAX_EXPONENT:
                raise PrecisionOverflow(n, max(DEFAULT_BIG_BITS, ell + 64))
    roots = {n: level_roots(schedule, n, arith) for n in schedule.levels}
    coeffs = {n: arith.pow2(-ell) for n, ell in zip(schedule.levels, schedule.exponents)}
    return CSFunction(schedule, policy, arith, roots, coeffs)


# -- shared kernel ---------------------------------------------------------------

def _one(arith, like):
    if arith.is_big:
        return arith.cplx(1)
    if isinstance(like, np.ndarray):
        return np.ones_like(like, dtype=complex)
    return 1 + 0j


def _q_parts(cs: CSFunction, w, J: int, derivs: bool):
    """Q, Q' and, per scheduled level, Q_n and Q_n' from one factor list."""
    ar = cs.arith
    if ar.is_big:
        w = ar.cplx(w)
        scale = [ar.pow2(-j) for j in range(1, J + 1)]
    else:
        scale = [2.0**-j for j in range(1, J + 1)]
    facs = [1 - w * s for s in scale]
    one = _one(ar, w)
    prefix = [one]
    for f in facs:
        prefix.append(prefix[-1] * f)
    suffix = [one] * (J + 1)
    for i in range(J - 1, -1, -1):
        suffix[i] = suffix[i + 1] * facs[i]
    Q = prefix[J]
    Qn = {n: (prefix[n - 1] * suffix[n] if n <= J else Q) for n in cs.schedule.levels}
    if not derivs:
        return Q, None, Qn, None
    neg = [-s for s in scale]
    dQ = leave_one_out_sum(facs, neg, one)
    dQn = {}
    for n in cs.schedule.levels:
        if n <= J:
            keep = [i for i in range(J) if i != n - 1]
            dQn[n] = leave_one_out_sum([facs[i] for i in keep], [neg[i] for i in keep], one)
        else:
            dQn[n] = dQ
    return Q, dQ, Qn, dQn


def _p_parts(cs: CSFunction, n: int, z, derivs: bool):
    ar = cs.arith
    if ar.is_big:
        z = ar.cplx(z)
    facs = [z - r for r in cs.roots[n]]
    one = _one(ar, z)
    P = one
    for f in facs:
        P = P * f
    if not derivs:
        return P, None
    return P, leave_one_out_sum(facs, [one] * len(facs), one)


@dataclass(frozen=True)
class GValue:
    g1: object
    g2: object
    tail1: float
    tail2: float


def eval_G(cs: CSFunction, z, w, *, terms: int | None = None) -> GValue:
    """Truncated series value and bounds on what the Q truncation drops."""
    J = terms if terms is not None else cs.terms_for(w)
    Q, _, Qn, _ = _q_parts(cs, w, J, derivs=False)
    ar = cs.arith
    g1 = 0 * _one(ar, z)
    size = 0.0
    for n in cs.schedule.levels:
        P, _ = _p_parts(cs, n, z, derivs=False)
        t = cs.coeffs[n] * Qn[n] * P
        g1 = g1 + t
        size = size + np.abs(complex(t) if ar.is_big else t)
    rel = cs.policy.relative_tail(_radius(w), J)
    a2 = abs(complex(Q)) if ar.is_big else np.abs(Q)
    return GValue(g1, Q, size * rel, a2 * rel)


def eval_G_jacobian(cs: CSFunction, z, w, *, terms: int | None = None):
    """[[dg1/dz, dg1/dw], [dg2/dz, dg2/dw]] as nested lists (backend scalars)."""
    J = terms if terms is not None else cs.terms_for(w)
    Q, dQ, Qn, dQn = _q_parts(cs, w, J, derivs=True)
    zero = 0 * _one(cs.arith, z)
    dz, dw = zero, zero
    for n in cs.schedule.levels:
        P, dP = _p_parts(cs, n, z, derivs=True)
        c = cs.coeffs[n]
        dz = dz + c * Qn[n] * dP
        dw = dw + c * dQn[n] * P
    return [[dz, dw], [zero, dQ]]


def eval_G_with_jacobian(cs: CSFunction, z, w, *, terms: int):
    """Values and Jacobian in one pass (scalars); used by orbit iteration."""
    Q, dQ, Qn, dQn = _q_parts(cs, w, terms, derivs=True)
    zero = 0 * _one(cs.arith, z)
    g1, dz, dw = zero, zero, zero
    for n in cs.schedule.levels:
        P, dP = _p_parts(cs, n, z, derivs=True)
        c = cs.coeffs[n]
        g1 = g1 + c * Qn[n] * P
        dz = dz + c * Qn[n] * dP
        dw = dw + c * dQn[n] * P
    return (g1, Q), [[dz, dw], [zero, dQ]]


def lattice_slope(cs: CSFunction, n: int, j: int, *, terms: int | None = None):
    """a = dg1/dz at (1/j, 2^n) = 2^{-l_n} Q_n(2^n) P_n'(1/j)."""
    ar = cs.arith
    w = ar.pow2(n) if ar.is_big else float(2**n)
    J = terms if terms is not None else cs.terms_for(w)
    _, _, Qn, _ = _q_parts(cs, w, J, derivs=False)
    z = lattice_root(j, 0, cs.schedule.period(n), ar)
    _, dP = _p_parts(cs, n, z, derivs=True)
    return cs.coeffs[n] * Qn[n] * dP


def log_G(cs: CSFunction, z, w, *, terms: int | None = None):
    """Complex logs (log g1, log g2) in double; broadcasts z against w."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    J = terms if terms is not None else cs.terms_for(w)
    lq = log_Q(w, terms=J)
    shape = np.broadcast_shapes(z.shape, w.shape)
    if not cs.schedule.periods:
        return np.full(shape, complex(-np.inf, 0.0)), np.broadcast_to(lq, shape)
    logs = []
    for n, ell in zip(cs.schedule.levels, cs.schedule.exponents):
        roots = [complex(r) for r in cs.roots[n]]
        logs.append(-ell * _LN2 + log_Q(w, terms=J, skip=n) + log_Pn(cs.schedule, n, z, roots=roots))
    return complex_logsumexp(logs), np.broadcast_to(lq, shape)


def log_abs_G(cs: CSFunction, z, w, *, terms: int | None = None):
    """(log|g1|, log|g2|) in double log space."""
    l1, l2 = log_G(cs, z, w, terms=terms)
    return np.real(l1), np.real(l2)


def zero_lattice(cs: CSFunction) -> list[LatticePoint]:
    """All m_n p_n lattice points, each checked to be a zero of G."""
    pts = []
    s = cs.schedule
    ar = cs.arith
    for n in s.levels:
        p = s.period(n)
        w = ar.pow2(n) if ar.is_big else float(2**n)
        for j in range(1, s.rate(n) + 1):
            for ell in range(p):
                zb = cs.roots[n][(j - 1) * p + ell]
                v = eval_G(cs, zb, w)
                if abs(complex(v.g1)) > v.tail1 or abs(complex(v.g2)) > v.tail2:
                    raise AssertionError(f"(j={j}, l={ell}, n={n}) is not a zero of G")
                pts.append(LatticePoint(n, j, ell, complex(zb), complex(2**n)))
    return pts
