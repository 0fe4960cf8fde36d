"""The map F = G + (rho(w) z, w) and verification of its periodic lattice.

With dispatchers, rho(w) = sum_m D_m(w)/m^2 * e^{2 pi i/p_m}, so at height
w = 2^n the z-coordinate of a lattice point is rotated by e^{2 pi i/p_n}.
The single-period variant uses the constant rho = e^{2 pi i/p}.

Verification of one lattice point runs in big-float arithmetic: the
isolation margin |det(dF^p - I)| is of size |a|^p with
a = 2^{-l_n} Q_n(2^n) P_n'(1/j), far below the double range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .arith import DOUBLE, big
from .cs_builder import (CSFunction, _q_parts, eval_G_with_jacobian, lattice_slope,
                         log_G, zero_lattice)
from .errors import (DegenerateJacobian, OrbitResidualTooLarge, Overflow,
                     PrimitivityFailure)
from .products import LatticePoint, _radius, complex_logsumexp

FD_AGREEMENT = 1e-3
NEWTON_MAX_STEPS = 50
NEWTON_MAX_DRIFT = 1e-6


@dataclass(frozen=True)
class MapF:
    cs: CSFunction
    dispatchers: tuple = ()
    single_period: int | None = None

    @property
    def arith(self):
        return self.cs.arith

    def at_precision(self, bits: int | None) -> "MapF":
        return MapF(self.cs.at_precision(bits), self.dispatchers, self.single_period)

    def terms_for(self, w) -> int:
        top = max(self.cs.schedule.levels, default=1)
        return self.cs.policy.terms_for(max(_radius(w), 2.0 ** (top + 1)))

    def _omega(self, p: int):
        return self.arith.unit_root(1, p)

    def rotation(self, w, terms: int):
        """rho(w) and rho'(w)."""
        ar = self.arith
        if self.single_period is not None:
            return self._omega(self.single_period), 0 * self._omega(1)
        rho, drho = 0 * self._omega(1), 0 * self._omega(1)
        s = self.cs.schedule
        for d in self.dispatchers:
            om = self._omega(s.period(d.m)) / (d.m * d.m)
            rho = rho + d(w, terms=terms, arith=ar) * om
            drho = drho + d.deriv(w, terms=terms, arith=ar) * om
        return rho, drho

    def step(self, z, w, *, terms: int, jacobian: bool = True):
        """F(z, w) and, optionally, dF(z, w) as [[a, b], [c, d]]."""
        (g1, g2), jac = eval_G_with_jacobian(self.cs, z, w, terms=terms)
        rho, drho = self.rotation(w, terms)
        if self.arith.is_big:
            z = self.arith.cplx(z)
            w = self.arith.cplx(w)
        val = (g1 + rho * z, g2 + w)
        if not jacobian:
            return val, None
        return val, [[jac[0][0] + rho, jac[0][1] + drho * z],
                     [jac[1][0], jac[1][1] + 1]]

    def __call__(self, z, w, *, terms: int | None = None):
        J = terms if terms is not None else self.terms_for(w)
        return self.step(z, w, terms=J, jacobian=False)[0]

    def jacobian(self, z, w, *, terms: int | None = None):
        J = terms if terms is not None else self.terms_for(w)
        return self.step(z, w, terms=J)[1]

    def log_abs(self, z, w, *, terms: int | None = None):
        """(log|f1|, log|f2|) in double log space for growth sampling."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        J = terms if terms is not None else self.terms_for(w)
        l1, l2 = log_G(self.cs, z, w, terms=J)
        with np.errstate(divide="ignore"):
            lz = np.log(z)
            lw = np.log(w)
        parts = [l1]
        if self.single_period is not None:
            parts.append(lz + 2j * math.pi / self.single_period)
        else:
            s = self.cs.schedule
            for d in self.dispatchers:
                shift = complex(-2.0 * math.log(d.m), 2.0 * math.pi / s.period(d.m))
                parts.append(d.log_value(w, terms=J) + shift + lz)
        f1 = complex_logsumexp(parts)
        f2 = complex_logsumexp([l2, lw])
        shape = np.broadcast_shapes(z.shape, w.shape)
        return np.broadcast_to(np.real(f1), shape), np.broadcast_to(np.real(f2), shape)


def assemble_F(cs: CSFunction, dispatchers=()) -> MapF:
    levels = set(cs.schedule.levels)
    for d in dispatchers:
        if d.m not in levels:
            raise ValueError(f"dispatcher for m={d.m} has no scheduled period")
    have = {d.m for d in dispatchers}
    if dispatchers and have != levels:
        raise ValueError(f"dispatchers missing for levels {sorted(levels - have)}")
    return MapF(cs, tuple(sorted(dispatchers, key=lambda d: d.m)))


def assemble_single_period(cs: CSFunction, p: int) -> MapF:
    """F_p = G + (e^{2 pi i/p} z, w); lattice levels with p | p_n become p-periodic."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return MapF(cs, (), int(p))


def _norm(u, v) -> float:
    return math.hypot(abs(complex(u)), abs(complex(v)))


def _fro(jac) -> float:
    return math.sqrt(sum(abs(complex(x)) ** 2 for row in jac for x in row))


def _matmul(A, B):
    return [[A[0][0] * B[0][0] + A[0][1] * B[1][0], A[0][0] * B[0][1] + A[0][1] * B[1][1]],
            [A[1][0] * B[0][0] + A[1][1] * B[1][0], A[1][0] * B[0][1] + A[1][1] * B[1][1]]]


def iterate(F: MapF, point, k: int, *, terms: int | None = None,
            return_conditioning: bool = False):
    """k-fold composition F^k(point); optionally the product of Jacobian norms."""
    if k < 0:
        raise ValueError("k must be >= 0")
    z, w = point
    J = terms if terms is not None else F.terms_for(w)
    cond = 1.0
    for _ in range(k):
        (z, w), jac = F.step(z, w, terms=J, jacobian=return_conditioning)
        if not F.arith.is_big and not (np.isfinite(z) and np.isfinite(w)):
            raise Overflow("orbit left the double range")
        if return_conditioning:
            cond *= _fro(jac)
    return ((z, w), cond) if return_conditioning else (z, w)


def orbit_with_jacobian(F: MapF, z, w, p: int, terms: int):
    """Orbit points x_0..x_p and the chain product dF^p at x_0."""
    pts = [(z, w)]
    chain = None
    for _ in range(p):
        (z, w), jac = F.step(z, w, terms=terms)
        chain = jac if chain is None else _matmul(jac, chain)
        pts.append((z, w))
    return pts, chain


def prod_root_identity(a, p: int, arith=None):
    """prod_{k<p} (1 + a e^{2 pi i k/p}), analytically 1 - (-a)^p.

    Computed in big-float arithmetic with enough bits that the product minus
    one keeps full relative accuracy; returns an mpmath complex.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if arith is None:
        la = abs(complex(a))
        loss = p * max(0.0, -math.log2(la)) if la > 0 else 0.0
        arith = big(int(80 + loss + 8 * math.log2(p + 1)))
    a = arith.cplx(a)
    out = arith.cplx(1)
    for k in range(p):
        out *= 1 + a * arith.unit_root(k, p)
    return out


def closed_form_det(a, dq, p: int):
    """det(dF^p - I) at a lattice point: -(-a)^p * ((1 + Q'(2^n))^p - 1)."""
    return -((-a) ** p) * ((1 + dq) ** p - 1)


@dataclass
class PPPRecord:
    point: LatticePoint
    period: int
    orbit_residual: float
    primitivity_margins: list
    primitivity_expected: list
    jacobian_log_margin: float
    chain_log_margin: float
    fd_log_margin: float
    newton_refined: bool
    newton_steps: int
    precision_bits: int

    @property
    def norm(self) -> float:
        return math.hypot(abs(self.point.z), abs(self.point.w))

    def to_dict(self) -> dict:
        return {
            "point": self.point.to_dict(),
            "period": self.period,
            "orbit_residual": self.orbit_residual,
            "primitivity_margins": self.primitivity_margins,
            "primitivity_expected": self.primitivity_expected,
            "jacobian_log2_margin": self.jacobian_log_margin,
            "chain_log2_margin": self.chain_log_margin,
            "fd_log2_margin": self.fd_log_margin,
            "newton_refined": self.newton_refined,
            "newton_steps": self.newton_steps,
            "precision_bits": self.precision_bits,
        }


def level_period(F: MapF, n: int) -> int:
    pn = F.cs.schedule.period(n)
    if F.single_period is None:
        return pn
    if pn % F.single_period:
        raise ValueError(f"period {F.single_period} does not divide p_n={pn} at level {n}")
    return F.single_period


def _log2(x) -> float:
    x = abs(x)
    if x == 0:
        return -math.inf
    return float(mpmath.log(x, 2)) if not isinstance(x, float) else math.log2(x)


def level_loss_bits(F: MapF, n: int) -> int:
    """-log2 |det(dF^p - I)| estimate, from the closed form at 256 bits."""
    cs = F.cs.at_precision(256)
    p = level_period(F, n)
    worst = 0.0
    J = F.terms_for(2.0**n)
    _, dq, _, _ = _q_parts(cs, cs.arith.pow2(n), J, derivs=True)
    second = _log2((1 + dq) ** p - 1)
    for j in range(1, F.cs.schedule.rate(n) + 1):
        la = _log2(lattice_slope(cs, n, j, terms=J))
        worst = max(worst, -(p * la + min(second, 0.0)))
    return int(math.ceil(worst))


def working_bits(loss: int) -> int:
    return max(128, loss + (loss + 1) // 2 + 164)


def verify_ppp(F: MapF, n: int, tol: float = 1e-10, newton: bool = True,
               newton_tol: float = 1e-12, bits: int | None = None,
               margin_floor: float = 1e-8, points=None) -> list[PPPRecord]:
    """Verify every lattice point of level n as an isolated primitive p-periodic point."""
    p = level_period(F, n)
    loss = level_loss_bits(F, n)
    bits = bits or working_bits(loss)
    Fb = F.at_precision(bits)
    ar = Fb.arith
    ctx = ar.ctx
    J = F.terms_for(2.0**n)
    w0 = ar.pow2(n)
    h = ar.pow2(-((loss + 1) // 2 + 40))
    _, dq, _, _ = _q_parts(Fb.cs, w0, J, derivs=True)
    second = (1 + dq) ** p - 1
    if dq == 0 or second == 0:
        raise DegenerateJacobian(f"Q'(2^{n}) violates the isolation condition at period {p}")
    s = F.cs.schedule
    pts = points if points is not None else [q for q in zero_lattice(F.cs) if q.n == n]
    records = []
    for pt in pts:
        z0 = Fb.cs.roots[n][(pt.j - 1) * s.period(n) + pt.ell]
        z, w = z0, ctx.mpc(w0)
        refined, steps = False, 0
        orbit, chain = orbit_with_jacobian(Fb, z, w, p, J)
        res = _norm(orbit[-1][0] - z, orbit[-1][1] - w)
        if newton:
            ok, zn, wn, steps = _newton(Fb, z, w, p, J, newton_tol)
            if ok:
                refined = True
                z, w = zn, wn
                orbit, chain = orbit_with_jacobian(Fb, z, w, p, J)
                res = _norm(orbit[-1][0] - z, orbit[-1][1] - w)
        if not res <= tol:
            raise OrbitResidualTooLarge(
                f"level {n} point (j={pt.j}, l={pt.ell}): |F^{p}(x) - x| = {res:.3e} > {tol:g}",
                point=pt)
        margins, expected = [], []
        for k in range(1, p):
            margins.append(_norm(orbit[k][0] - z, orbit[k][1] - w))
            expected.append(2.0 * abs(pt.z) * abs(math.sin(math.pi * k / p)))
            if margins[-1] < margin_floor:
                raise PrimitivityFailure(
                    f"level {n} point (j={pt.j}, l={pt.ell}) returns after {k} < {p} steps",
                    point=pt)
        a = lattice_slope(Fb.cs, n, pt.j, terms=J)
        closed = p * _log2(a) + _log2(second)
        det_chain = (chain[0][0] - 1) * (chain[1][1] - 1) - chain[0][1] * chain[1][0]
        lchain = _log2(det_chain)
        lfd = _log2(_fd_det(Fb, z, w, p, J, h))
        if not math.isfinite(closed):
            raise DegenerateJacobian(f"level {n} point (j={pt.j}, l={pt.ell}): zero slope",
                                     point=pt)
        for name, val in (("chain", lchain), ("finite-difference", lfd)):
            if not abs(val - closed) <= FD_AGREEMENT * abs(closed):
                raise DegenerateJacobian(
                    f"level {n} point (j={pt.j}, l={pt.ell}): {name} log2|det| {val:.6g} "
                    f"vs closed form {closed:.6g}", point=pt)
        records.append(PPPRecord(pt, p, res, margins, expected, closed, lchain, lfd,
                                 refined, steps, bits))
    return records


def _newton(Fb: MapF, z, w, p: int, J: int, tol: float):
    """Newton on F^p(x) - x from the lattice point; (ok, z, w, steps)."""
    z0, w0 = z, w
    for it in range(NEWTON_MAX_STEPS + 1):
        orbit, chain = orbit_with_jacobian(Fb, z, w, p, J)
        r1, r2 = orbit[-1][0] - z, orbit[-1][1] - w
        if _norm(r1, r2) <= tol:
            return _norm(z - z0, w - w0) <= NEWTON_MAX_DRIFT, z, w, it
        if it == NEWTON_MAX_STEPS:
            break
        a, b = chain[0][0] - 1, chain[0][1]
        c, d = chain[1][0], chain[1][1] - 1
        det = a * d - b * c
        if det == 0:
            break
        dz = -(d * r1 - b * r2) / det
        dw = -(a * r2 - c * r1) / det
        z, w = z + dz, w + dw
        if _norm(z - z0, w - w0) > NEWTON_MAX_DRIFT:
            break
    return False, z0, w0, NEWTON_MAX_STEPS


def _fd_det(Fb: MapF, z, w, p: int, J: int, h):
    """det(D - I) with D the central-difference Jacobian of F^p."""
    def Fp(zz, ww):
        return iterate(Fb, (zz, ww), p, terms=J)
    zp, zm = Fp(z + h, w), Fp(z - h, w)
    wp, wm = Fp(z, w + h), Fp(z, w - h)
    j11 = (zp[0] - zm[0]) / (2 * h)
    j21 = (zp[1] - zm[1]) / (2 * h)
    j12 = (wp[0] - wm[0]) / (2 * h)
    j22 = (wp[1] - wm[1]) / (2 * h)
    return (j11 - 1) * (j22 - 1) - j12 * j21


def count_ppp(records, p: int, r: float) -> int:
    """Number of verified p-periodic records with |(z, w)| <= r."""
    return sum(1 for rec in records if rec.period == p and rec.norm <= r)


@dataclass
class LevelCount:
    n: int
    period: int
    claimed: int
    original_rate: int
    lattice_size: int
    count_at_2n_plus_1: int
    count_at_2n: int
    records: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "period": self.period, "claimed_m_n": self.claimed,
            "original_m_n": self.original_rate, "lattice_size": self.lattice_size,
            "verified_within_2n_plus_1": self.count_at_2n_plus_1,
            "verified_within_2n": self.count_at_2n,
            "records": [r.to_dict() for r in self.records],
        }


@dataclass
class CountReport:
    levels: list

    @property
    def ok(self) -> bool:
        return all(l.count_at_2n_plus_1 >= l.claimed for l in self.levels)

    @property
    def total_verified(self) -> int:
        return sum(len(l.records) for l in self.levels)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "total_verified": self.total_verified,
            "claimed_total": sum(l.claimed for l in self.levels),
            "radius_note": "lattice points (z, 2^n) have norm > 2^n; counts are "
                           "reported at radius 2^n + 1 and at 2^n",
            "levels": [l.to_dict() for l in self.levels],
        }


def count_report(F: MapF, tol: float = 1e-10, newton: bool = True,
                 newton_tol: float = 1e-12) -> CountReport:
    s = F.cs.schedule
    levels = []
    for n in s.levels:
        recs = verify_ppp(F, n, tol=tol, newton=newton, newton_tol=newton_tol)
        p = level_period(F, n)
        levels.append(LevelCount(n, p, s.rate(n), s.original_rate(n), s.lattice_size(n),
                                 count_ppp(recs, p, 2.0**n + 1), count_ppp(recs, p, 2.0**n),
                                 recs))
    return CountReport(levels)
