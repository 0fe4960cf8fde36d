"""Infinite products Q, Q_n and the root-of-unity polynomials P_n.

    Q(w)   = prod_{j>=1} (1 - w/2^j)
    Q_n(w) = prod_{j!=n} (1 - w/2^j)
    P_n(z) = prod_{j=1..m_n} prod_{l=0..p_n-1} (z - e^{2 pi i l/p_n}/j)

Q and Q_n are truncated after J factors, with J chosen from a
:class:`TruncationPolicy` so the multiplicative tail stays within ``eps``.
Every evaluator takes an ``arith`` backend (see :mod:`ordzero.arith`); the
double backend accepts numpy arrays and rescales partial products by powers
of two whenever they leave [1e-300, 1e300].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .arith import DOUBLE
from .errors import Overflow, TruncationFailure

_LN2 = math.log(2.0)
_HI, _LO = 1e300, 1e-300


@dataclass(frozen=True)
class TruncationPolicy:
    eps: float = 1e-15
    max_terms: int = 512

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_terms < 8:
            raise ValueError("max_terms must be at least 8")

    def terms_for(self, radius: float) -> int:
        """Number of factors J so that sum_{j>J} radius/2^j <= eps/2."""
        radius = float(radius)
        if radius <= 0:
            return 8
        J = max(math.ceil(math.log2(2.0 * radius / self.eps)), 8)
        if J > self.max_terms:
            raise TruncationFailure(
                f"|w|={radius:g} needs {J} factors for eps={self.eps:g}, "
                f"max_terms={self.max_terms}"
            )
        return J

    def relative_tail(self, radius: float, terms: int) -> float:
        """Bound on |prod_{j>J}(1 - w/2^j) - 1| for |w| <= radius."""
        return math.expm1(float(radius) * 2.0**-terms)


DEFAULT_POLICY = TruncationPolicy()


@dataclass(frozen=True)
class Schedule:
    """Periods p_n and rates m_n for levels n = start_index, start_index+1, ...

    Build with :meth:`from_sequences`, which normalizes the rates so that the
    degrees d_n = m_n + p_n are strictly increasing.
    """

    periods: tuple[int, ...]
    rates: tuple[int, ...]
    start_index: int = 2
    original_rates: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(int(p) for p in self.periods))
        object.__setattr__(self, "rates", tuple(int(m) for m in self.rates))
        if self.original_rates is None:
            object.__setattr__(self, "original_rates", self.rates)
        else:
            object.__setattr__(self, "original_rates", tuple(self.original_rates))
        if len(self.periods) != len(self.rates):
            raise ValueError("periods and rates must have the same length")
        if any(p < 1 for p in self.periods) or any(m < 1 for m in self.rates):
            raise ValueError("periods and rates must be positive")
        if self.start_index < 1:
            raise ValueError("start_index must be >= 1")
        d = self.degrees
        if any(b <= a for a, b in zip(d, d[1:])):
            raise ValueError("degrees m_n + p_n must be strictly increasing; "
                             "use Schedule.from_sequences to normalize")

    @classmethod
    def from_sequences(cls, periods, rates, start_index: int = 2) -> "Schedule":
        periods = [int(p) for p in periods]
        original = [int(m) for m in rates]
        if len(periods) != len(original):
            raise ValueError("periods and rates must have the same length")
        normalized = list(original)
        for i in range(1, len(periods)):
            prev = normalized[i - 1] + periods[i - 1]
            if normalized[i] + periods[i] <= prev:
                normalized[i] = prev + 1 - periods[i]
        return cls(tuple(periods), tuple(normalized), start_index, tuple(original))

    @property
    def levels(self) -> range:
        return range(self.start_index, self.start_index + len(self.periods))

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(m + p for m, p in zip(self.rates, self.periods))

    @property
    def exponents(self) -> tuple[int, ...]:
        # smallest integers with l_n > d_n^2
        return tuple(d * d + 1 for d in self.degrees)

    @property
    def lattice_sizes(self) -> tuple[int, ...]:
        return tuple(m * p for m, p in zip(self.rates, self.periods))

    def _i(self, n: int) -> int:
        i = n - self.start_index
        if not 0 <= i < len(self.periods):
            raise IndexError(f"level {n} is not scheduled (levels {self.levels})")
        return i

    def period(self, n: int) -> int:
        return self.periods[self._i(n)]

    def rate(self, n: int) -> int:
        return self.rates[self._i(n)]

    def original_rate(self, n: int) -> int:
        return self.original_rates[self._i(n)]

    def exponent(self, n: int) -> int:
        return self.exponents[self._i(n)]

    def degree(self, n: int) -> int:
        return self.degrees[self._i(n)]

    def lattice_size(self, n: int) -> int:
        return self.lattice_sizes[self._i(n)]

    def to_dict(self) -> dict:
        return {
            "start_index": self.start_index,
            "periods": list(self.periods),
            "rates": list(self.rates),
            "original_rates": list(self.original_rates),
            "degrees": list(self.degrees),
            "lattice_sizes": list(self.lattice_sizes),
            "exponents": list(self.exponents),
        }


@dataclass(frozen=True)
class LatticePoint:
    n: int
    j: int
    ell: int
    z: complex
    w: complex

    def to_dict(self) -> dict:
        return {"n": self.n, "j": self.j, "ell": self.ell,
                "z": [self.z.real, self.z.imag], "w": [self.w.real, self.w.imag]}


def lattice_root(j: int, ell: int, p: int, arith=DOUBLE):
    """z_{j,l} = e^{2 pi i l/p}/j from the polar form."""
    return arith.unit_root(ell, p) / j


def level_roots(schedule: Schedule, n: int, arith=DOUBLE) -> list:
    p, m = schedule.period(n), schedule.rate(n)
    return [lattice_root(j, ell, p, arith) for j in range(1, m + 1) for ell in range(p)]


# -- product kernels ---------------------------------------------------------

def _radius(w) -> float:
    if isinstance(w, np.ndarray):
        return float(np.max(np.abs(w))) if w.size else 0.0
    return float(abs(w))


def _q_factors(w, terms: int, arith, skip=None) -> list:
    if arith.is_big:
        w = arith.cplx(w)
        return [1 - w * arith.pow2(-j) for j in range(1, terms + 1) if j != skip]
    return [1.0 - w * 2.0**-j for j in range(1, terms + 1) if j != skip]


def _renorm(mant, e2):
    a = np.abs(mant)
    bad = (a > _HI) | ((a < _LO) & (a > 0))
    if not np.any(bad):
        return mant, e2
    _, e = np.frexp(np.where(bad, a, 1.0))
    e = np.where(bad, e, 0)
    mant = np.ldexp(np.real(mant), -e) + 1j * np.ldexp(np.imag(mant), -e)
    return mant, e2 + e


def scaled_product(factors):
    """Product of double factors as (mantissa, binary exponent)."""
    mant = np.asarray(1.0 + 0j)
    e2 = np.asarray(0)
    for f in factors:
        mant = mant * f
        mant, e2 = _renorm(mant, e2)
    return mant, e2


def _finish(mant, e2):
    with np.errstate(over="ignore"):
        val = np.ldexp(np.real(mant), e2) + 1j * np.ldexp(np.imag(mant), e2)
    if not np.all(np.isfinite(val)):
        raise Overflow("product exceeds the double range; use the log-space "
                       "evaluators or a big-float backend")
    return val[()] if val.ndim == 0 else val


def _log_finish(mant, e2):
    with np.errstate(divide="ignore"):
        out = np.log(mant) + e2 * _LN2
    return out[()] if np.ndim(out) == 0 else out


def _product(factors, arith):
    if arith.is_big:
        out = arith.cplx(1)
        for f in factors:
            out *= f
        return out
    return _finish(*scaled_product(factors))


def leave_one_out_sum(factors, coeffs, one):
    """sum_k coeffs[k] * prod_{i != k} factors[i] via prefix/suffix products."""
    n = len(factors)
    if n == 0:
        return 0 * one
    prefix = [one] * (n + 1)
    for i, f in enumerate(factors):
        prefix[i + 1] = prefix[i] * f
    total = 0 * one
    suffix = one
    for k in range(n - 1, -1, -1):
        total = total + coeffs[k] * prefix[k] * suffix
        suffix = suffix * factors[k]
    return total


# -- public evaluators ---------------------------------------------------------

def eval_Q(w, policy: TruncationPolicy = DEFAULT_POLICY, *, terms=None, arith=DOUBLE):
    """Truncated Q(w) and an absolute bound on the dropped tail."""
    radius = _radius(w)
    J = terms if terms is not None else policy.terms_for(radius)
    value = _product(_q_factors(w, J, arith), arith)
    rel = policy.relative_tail(radius, J)
    return value, abs(value) * rel


def eval_Qn(n: int, w, policy: TruncationPolicy = DEFAULT_POLICY, *, terms=None,
            arith=DOUBLE):
    if n < 1:
        raise ValueError("n must be >= 1")
    J = terms if terms is not None else policy.terms_for(_radius(w))
    return _product(_q_factors(w, J, arith, skip=n), arith)


def _deriv(w, J, arith, skip=None):
    js = [j for j in range(1, J + 1) if j != skip]
    facs = _q_factors(w, J, arith, skip=skip)
    if arith.is_big:
        coeffs = [-arith.pow2(-j) for j in js]
        one = arith.cplx(1)
    else:
        coeffs = [-(2.0**-j) for j in js]
        one = np.ones_like(w, dtype=complex) if isinstance(w, np.ndarray) else 1 + 0j
    out = leave_one_out_sum(facs, coeffs, one)
    if not arith.is_big and not np.all(np.isfinite(out)):
        raise Overflow("derivative exceeds the double range")
    return out


def _deriv_terms(w, policy):
    # the derivative's tail sum_{j>J} 2^-j needs J >= log2(2/eps) even near 0
    return policy.terms_for(max(_radius(w), 1.0))


def eval_Q_deriv(w, policy: TruncationPolicy = DEFAULT_POLICY, *, terms=None, arith=DOUBLE):
    """Derivative of the truncated Q. Note d/dw(1 - w/2^j) = -2^-j."""
    J = terms if terms is not None else _deriv_terms(w, policy)
    return _deriv(w, J, arith)


def eval_Qn_deriv(n: int, w, policy: TruncationPolicy = DEFAULT_POLICY, *, terms=None,
                  arith=DOUBLE):
    J = terms if terms is not None else _deriv_terms(w, policy)
    return _deriv(w, J, arith, skip=n)


def _pn_factors(schedule, n, z, arith, roots=None):
    roots = roots if roots is not None else level_roots(schedule, n, arith)
    if arith.is_big:
        z = arith.cplx(z)
    return [z - r for r in roots]


def eval_Pn(schedule: Schedule, n: int, z, *, arith=DOUBLE, roots=None):
    """The displayed product over all m_n * p_n lattice roots of level n."""
    return _product(_pn_factors(schedule, n, z, arith, roots), arith)


def eval_Pn_deriv(schedule: Schedule, n: int, z, *, arith=DOUBLE, roots=None):
    facs = _pn_factors(schedule, n, z, arith, roots)
    one = arith.cplx(1) if arith.is_big else (
        np.ones_like(z, dtype=complex) if isinstance(z, np.ndarray) else 1 + 0j)
    out = leave_one_out_sum(facs, [one] * len(facs), one)
    if not arith.is_big and not np.all(np.isfinite(out)):
        raise Overflow("P_n' exceeds the double range")
    return out


# -- log-space (double, vectorized) ------------------------------------------

def log_Q(w, policy: TruncationPolicy = DEFAULT_POLICY, *, terms=None, skip=None):
    """Complex logarithm of the truncated Q (or Q_skip); -inf real part at zeros."""
    w = np.asarray(w, dtype=complex)
    J = terms if terms is not None else policy.terms_for(_radius(w))
    return _log_finish(*scaled_product(_q_factors(w, J, DOUBLE, skip=skip)))


def log_Pn(schedule: Schedule, n: int, z, *, roots=None):
    z = np.asarray(z, dtype=complex)
    return _log_finish(*scaled_product(_pn_factors(schedule, n, z, DOUBLE, roots)))


def complex_logsumexp(logs):
    """log(sum(exp(l))) for complex logs, stable for huge real parts."""
    logs = [np.asarray(l, dtype=complex) for l in logs]
    if not logs:
        raise ValueError("empty sum")
    shape = np.broadcast_shapes(*(l.shape for l in logs))
    re = np.stack([np.broadcast_to(l.real, shape) for l in logs])
    m = np.max(re, axis=0)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(invalid="ignore", under="ignore"):
        s = sum(np.exp(np.broadcast_to(l, shape) - safe) for l in logs)
    with np.errstate(divide="ignore"):
        out = np.log(s) + safe
    out = np.where(np.isneginf(m), complex(-np.inf, 0.0), out)
    return out[()] if out.ndim == 0 else out
