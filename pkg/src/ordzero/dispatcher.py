"""Dispatchers: entire functions with D_m(2^n) = M if n == m and 0 otherwise.

The explicit family used for assembling F is

    D_m(w) = M * Q_m(w) / Q_m(2^m) = M * prod_{j != m} (2^j - w) / (2^j - 2^m)

evaluated with one truncation index for numerator and normalizer, so the
node values hold exactly.  Its growth constant depends on m; it does not
reproduce a uniform constant across m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .arith import DOUBLE
from .growth import fit_growth, log_sq
from .products import DEFAULT_POLICY, Schedule, TruncationPolicy, _radius, leave_one_out_sum

EXPLICIT = "explicit-product"
NUMERIC = "dbar-numeric"
GROWTH_RADII = tuple(2.0**k for k in range(1, 13))


@dataclass(frozen=True)
class Dispatcher:
    m: int
    M: float
    kind: str = EXPLICIT
    policy: TruncationPolicy = DEFAULT_POLICY
    growth: dict = field(default_factory=dict, compare=False)

    def terms_for(self, w) -> int:
        return self.policy.terms_for(max(_radius(w), 2.0**self.m))

    def _factors(self, w, J, arith):
        m = self.m
        if arith.is_big:
            w = arith.cplx(w)
            p2 = [arith.pow2(j) for j in range(1, J + 1)]
            den = [p2[j - 1] - arith.pow2(m) for j in range(1, J + 1)]
        else:
            p2 = [2.0**j for j in range(1, J + 1)]
            den = [p2[j - 1] - 2.0**m for j in range(1, J + 1)]
        keep = [j for j in range(1, J + 1) if j != m]
        return ([(p2[j - 1] - w) / den[j - 1] for j in keep],
                [-1 / den[j - 1] for j in keep])

    def __call__(self, w, *, terms: int | None = None, arith=DOUBLE):
        J = terms if terms is not None else self.terms_for(w)
        facs, _ = self._factors(w, J, arith)
        out = arith.real(self.M) if arith.is_big else self.M
        for f in facs:
            out = out * f
        return out

    def deriv(self, w, *, terms: int | None = None, arith=DOUBLE):
        J = terms if terms is not None else self.terms_for(w)
        facs, coeffs = self._factors(w, J, arith)
        if arith.is_big:
            one = arith.cplx(1)
        else:
            one = np.ones_like(w, dtype=complex) if isinstance(w, np.ndarray) else 1 + 0j
        return (arith.real(self.M) if arith.is_big else self.M) * leave_one_out_sum(facs, coeffs, one)

    def log_value(self, w, *, terms: int | None = None):
        """Complex log of D_m(w) for double arrays."""
        w = np.asarray(w, dtype=complex)
        J = terms if terms is not None else self.terms_for(w)
        facs, _ = self._factors(w, J, DOUBLE)
        out = np.full(w.shape, complex(math.log(abs(self.M)) if self.M else -np.inf,
                                       math.pi if self.M < 0 else 0.0))
        with np.errstate(divide="ignore"):
            for f in facs:
                out = out + np.log(f)
        return out


def circle_log_max(fn_log, r: float, samples: int = 256) -> float:
    w = r * np.exp(2j * np.pi * np.arange(samples) / samples)
    return float(np.max(np.real(fn_log(w))))


def build_explicit_dispatcher(m: int, M: float, policy: TruncationPolicy = DEFAULT_POLICY,
                              start_index: int = 2) -> Dispatcher:
    if m < start_index:
        raise ValueError(f"m={m} is below start_index={start_index}")
    d = Dispatcher(int(m), float(M), EXPLICIT, policy)
    # max modulus on |w| <= r is attained on the circle
    y = [circle_log_max(d.log_value, r) for r in GROWTH_RADII]
    c, const = fit_growth(GROWTH_RADII, y)
    big = [k for k, r in enumerate(GROWTH_RADII) if r >= 16]
    ratio = np.asarray(y)[big] / log_sq(np.asarray(GROWTH_RADII)[big])
    d.growth.update({
        "radii": list(GROWTH_RADII),
        "log_max": y,
        "c_fit": c,
        "const_fit": const,
        "max_logM_over_log2r": float(np.max(ratio)),
        "uniform_constant": False,
        "note": "growth constant depends on m",
    })
    return d


def build_dispatchers(schedule: Schedule, policy: TruncationPolicy = DEFAULT_POLICY,
                      scale: float = 1.0) -> list[Dispatcher]:
    """One explicit dispatcher per scheduled level with M = scale * m^2."""
    return [build_explicit_dispatcher(m, scale * m * m, policy, schedule.start_index)
            for m in schedule.levels]


def dispatcher_sum(schedule: Schedule, dispatchers, w, *, terms: int | None = None,
                   arith=DOUBLE):
    """sum over scheduled m of D_m(w)/m^2."""
    by_m = {d.m: d for d in dispatchers}
    missing = [m for m in schedule.levels if m not in by_m]
    if missing:
        raise ValueError(f"no dispatcher for levels {missing}")
    out = 0
    for m in schedule.levels:
        out = out + by_m[m](w, terms=terms, arith=arith) / (m * m)
    return out


@dataclass(frozen=True)
class GridDispatcher:
    """A numerically solved dispatcher sampled on a grid (bilinear lookup)."""

    m: int
    M: float
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    kind: str = NUMERIC

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        h = self.x[1] - self.x[0]
        fx = (w.real - self.x[0]) / h
        fy = (w.imag - self.y[0]) / h
        i = np.clip(np.floor(fx).astype(int), 0, len(self.x) - 2)
        j = np.clip(np.floor(fy).astype(int), 0, len(self.y) - 2)
        tx, ty = fx - i, fy - j
        v = self.values
        out = ((1 - tx) * (1 - ty) * v[i, j] + tx * (1 - ty) * v[i + 1, j]
               + (1 - tx) * ty * v[i, j + 1] + tx * ty * v[i + 1, j + 1])
        return out[()] if out.ndim == 0 else out


def validate_against_dbar(m, M: float, dbar_config=None, *, J=None, solution=None) -> dict:
    """Compare the explicit dispatcher with the weighted dbar solution.

    ``J`` defaults to {m}; a precomputed ``solution`` may be passed to reuse
    a solve.
    """
    from .dbar import DbarConfig, solve_problem, growth_certificate

    J = tuple(sorted(J if J is not None else (m,)))
    cfg = dbar_config or DbarConfig()
    sol = solution if solution is not None else solve_problem(cfg, J=J, M=M)
    explicit = {mm: build_explicit_dispatcher(mm, M) for mm in J}
    nodes = []
    for k in range(cfg.k_min, cfg.k_max + 1):
        w = complex(2**k)
        e = sum(float(np.real(d(w))) for d in explicit.values())
        num = complex(sol.f_at(w))
        nodes.append({"k": k, "explicit": e, "numeric": [num.real, num.imag],
                      "deviation": abs(num - e)})
    cert = growth_certificate(sol)
    return {
        "m": m, "M": M, "J": list(J),
        "nodes": nodes,
        "max_node_deviation": max(n["deviation"] for n in nodes),
        "explicit_growth": {mm: {"c_fit": d.growth["c_fit"], "const_fit": d.growth["const_fit"]}
                            for mm, d in explicit.items()},
        "numeric_growth": {"c_fit": cert["c_fit"], "const_fit": cert["const_fit"]},
    }


def max_logM_ratio(d: Dispatcher, radii=GROWTH_RADII) -> float:
    y = np.array([circle_log_max(d.log_value, r) for r in radii])
    return float(np.max(y / log_sq(radii)))
