"""Double and big-float arithmetic backends.

Evaluators in this package are written once against a small backend object so
the same code runs on Python/numpy complex doubles and on mpmath big floats.
The big-float backend owns a private ``mpmath.MPContext``, so precision is
per-instance and never touches mpmath's global context.
"""

from __future__ import annotations

import math
from functools import lru_cache

import mpmath
import numpy as np

_QUARTER_TURNS = (1 + 0j, 1j, -1 + 0j, -1j)


class DoubleArith:
    """IEEE binary64 backend. Works elementwise on numpy arrays."""

    bits = 53
    is_big = False

    def cplx(self, x):
        if isinstance(x, np.ndarray):
            return x.astype(complex)
        return complex(x)

    def real(self, x):
        return float(x)

    def unit_root(self, ell: int, p: int):
        """exp(2*pi*i*ell/p), exact at quarter turns."""
        ell %= p
        if (4 * ell) % p == 0:
            return _QUARTER_TURNS[(4 * ell) // p]
        t = 2.0 * math.pi * ell / p
        return complex(math.cos(t), math.sin(t))

    def pow2(self, e: int):
        return math.ldexp(1.0, e)

    def abs(self, x):
        return abs(x)

    def log2abs(self, x) -> float:
        a = abs(x)
        return math.log2(a) if a > 0 else -math.inf

    def to_complex(self, x) -> complex:
        return complex(x)

    def __repr__(self):
        return "DoubleArith()"


class BigArith:
    """mpmath backend with a private context of ``bits`` mantissa bits."""

    is_big = True

    def __init__(self, bits: int):
        if bits < 53:
            raise ValueError("big-float precision must be at least 53 bits")
        self.bits = int(bits)
        self.ctx = mpmath.MPContext()
        self.ctx.prec = self.bits

    def cplx(self, x):
        return self.ctx.mpc(x)

    def real(self, x):
        return self.ctx.mpf(x)

    def unit_root(self, ell: int, p: int):
        ell %= p
        if (4 * ell) % p == 0:
            return self.ctx.mpc(_QUARTER_TURNS[(4 * ell) // p])
        t = self.ctx.mpf(2 * ell) / p
        return self.ctx.mpc(self.ctx.cospi(t), self.ctx.sinpi(t))

    def pow2(self, e: int):
        return self.ctx.ldexp(self.ctx.mpf(1), e)

    def abs(self, x):
        return abs(x)

    def log2abs(self, x) -> float:
        a = abs(x)
        if a == 0:
            return -math.inf
        return float(self.ctx.log(a, 2))

    def to_complex(self, x) -> complex:
        return complex(x)

    def __repr__(self):
        return f"BigArith({self.bits})"


DOUBLE = DoubleArith()


@lru_cache(maxsize=64)
def big(bits: int) -> BigArith:
    return BigArith(bits)


def arith_for(bits: int | None):
    """Backend for a precision setting; ``None`` or 53 means double."""
    if bits is None or bits == 53:
        return DOUBLE
    return big(bits)
