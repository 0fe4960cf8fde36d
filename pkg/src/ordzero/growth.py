"""Maximum-modulus sampling on spheres of C^2 and log^2 growth fits.

Maps are passed as *log-abs evaluators*: callables ``(z, w) -> (log|f1|,
log|f2|)`` that broadcast over numpy arrays.  Working with logarithms keeps
radii up to 2^12 free of overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DENSITY = (64, 64, 16)  # (phi, psi, s)
DEFAULT_RADII = tuple(2.0**k for k in range(1, 11))


def _check_density(density):
    nphi, npsi, ns = density
    if min(nphi, npsi, ns) < 2 or min(nphi, npsi) < 32:
        raise ValueError("density needs >= 32 angular samples per dimension")
    return int(nphi), int(npsi), int(ns)


def sphere_grid(r: float, density=DEFAULT_DENSITY):
    """z of shape (S, Phi, 1) and w of shape (S, 1, Psi) covering the sphere.

    s runs over ns+1 equispaced values in [0, 1] (both ends included), so
    doubling any density entry gives a superset of sample points.
    """
    nphi, npsi, ns = _check_density(density)
    s = np.linspace(0.0, 1.0, ns + 1)
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    psi = 2.0 * np.pi * np.arange(npsi) / npsi
    rz = r * s
    rw = r * np.sqrt(np.clip(1.0 - s * s, 0.0, None))
    z = rz[:, None, None] * np.exp(1j * phi)[None, :, None]
    w = rw[:, None, None] * np.exp(1j * psi)[None, None, :]
    return z, w


def sample_max_modulus(log_abs_map, r: float, density=DEFAULT_DENSITY) -> float:
    """log of the largest componentwise sup-norm of F seen on the sphere |(z,w)| = r.

    The true log M_F(r) is at least this value.
    """
    z, w = sphere_grid(r, density)
    comps = log_abs_map(z, w)
    best = -math.inf
    for c in comps:
        c = np.asarray(c, dtype=float)
        if c.size:
            best = max(best, float(np.max(c)))
    return best


def log_sq(r) -> np.ndarray:
    return np.log(np.asarray(r, dtype=float) + 1.0) ** 2


def fit_growth(radii, log_samples) -> tuple[float, float]:
    """Envelope c*log^2(r+1) + const dominating every sample.

    c is the smallest slope for which the line through the first sample stays
    above all later ones, and const places the line on that sample; for data
    that is exactly affine in log^2(r+1) this recovers the generating pair.
    """
    L = log_sq(radii)
    y = np.asarray(log_samples, dtype=float)
    if len(L) < 2:
        raise ValueError("need at least two radii")
    order = np.argsort(L)
    L, y = L[order], y[order]
    slopes = (y[1:] - y[0]) / (L[1:] - L[0])
    c = max(float(np.max(slopes)), 0.0)
    const = float(np.max(y - c * L))
    return c, const


def envelope(radii, c: float, const: float) -> np.ndarray:
    return c * log_sq(radii) + const


def order_estimate(radii, log_samples) -> float:
    """max of log log M / log r over the radii in the top decade with M > e."""
    r = np.asarray(radii, dtype=float)
    y = np.asarray(log_samples, dtype=float)
    top = r >= r.max() / 10.0
    ok = top & (y > 1.0) & (r > 1.0)
    if not np.any(ok):
        return 0.0
    return float(np.max(np.log(y[ok]) / np.log(r[ok])))


@dataclass
class GrowthReport:
    radii: list
    log_samples: list
    density: tuple
    c_fit: float
    const_fit: float
    order_estimate: float
    degenerate: bool
    notes: list = field(default_factory=list)

    def dominates(self) -> bool:
        env = envelope(self.radii, self.c_fit, self.const_fit)
        y = np.asarray(self.log_samples)
        return bool(np.all(env >= y - 1e-9 * np.maximum(1.0, np.abs(y))))

    def to_dict(self) -> dict:
        return {
            "radii": list(self.radii),
            "log_max": list(self.log_samples),
            "envelope": [float(v) for v in envelope(self.radii, self.c_fit, self.const_fit)],
            "density": list(self.density),
            "c_fit": self.c_fit,
            "const_fit": self.const_fit,
            "order_estimate": self.order_estimate,
            "degenerate": self.degenerate,
            "notes": list(self.notes),
        }


def growth_report(log_abs_map, radii=DEFAULT_RADII, density=DEFAULT_DENSITY) -> GrowthReport:
    radii = [float(r) for r in radii]
    if len(radii) < 6 or max(radii) / min(radii) < 8:
        raise ValueError("need >= 6 radii spanning >= 3 octaves")
    y = [sample_max_modulus(log_abs_map, r, density) for r in radii]
    c, const = fit_growth(radii, y)
    # the fit degenerates when the tail grows much slower than log^2
    L = log_sq(radii)
    tail = (y[-1] - y[-2]) / (L[-1] - L[-2])
    degenerate = bool(c > 0 and tail < 0.5 * c)
    notes = ["tail slope below half of c_fit; growth is slower than log^2"] if degenerate else []
    return GrowthReport(radii, y, tuple(density), c, const, order_estimate(radii, y),
                        degenerate, notes)


def fixed_slope_constant(radii, log_samples, c: float) -> float:
    """Smallest const with log M <= c*log^2(r+1) + const at every sample."""
    return float(np.max(np.asarray(log_samples) - c * log_sq(radii)))
