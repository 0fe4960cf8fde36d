"""Base potential u0, logarithmic punctures at 2^k, and discrete checks.

u0 is radial: C log r for r < 2, max(C log r, C log^2 r) on [2, 3] and
C log^2 r beyond (natural logarithms).  Inside the disk B_k = B(2^k, 2^{k-3})
the punctured potential is

    v(z) = (P_D u_k)((z - 2^k)/r_k) + A_k log(|z - 2^k|/r_k),

u_k(zeta) = u0(2^k + r_k zeta), with A_k = c r_k^2 inf_{B_k} Delta u0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import QuadratureUnderresolved, SubharmonicityViolation

NEG_INF = -1e300  # stand-in for v = -infinity at puncture centers
BOUNDARY_SAMPLES = 1024


# -- disk kernels ----------------------------------------------------------------

def poisson_integral(boundary, point) -> float:
    """Harmonic extension of uniform boundary samples f(e^{2 pi i k/N}) to ``point``."""
    f = np.asarray(boundary, dtype=float)
    N = f.size
    if N < 256:
        raise ValueError("need at least 256 boundary samples")
    point = complex(point)
    r = abs(point)
    if r >= 1:
        raise ValueError("point must lie in the open unit disk")
    if 1.0 - r < 4.0 * 2.0 * math.pi / N:
        raise QuadratureUnderresolved(
            f"kernel width {1 - r:.3g} is below 4 sample spacings for N={N}")
    t = 2.0 * math.pi * np.arange(N) / N
    theta = math.atan2(point.imag, point.real)
    kern = (1 - r * r) / (1 - 2 * r * np.cos(theta - t) + r * r)
    return float(np.mean(kern * f))


def green_kernel(x, w):
    """g_D(x, w) = log(|x - w| / |1 - x conj(w)|) on the unit disk (<= 0)."""
    return np.log(np.abs(x - w)) - np.log(np.abs(1 - x * np.conj(w)))


@lru_cache(maxsize=8)
def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def green_potential(laplacian, point, n_radial: int = 256, n_angular: int = 512) -> float:
    """(1/2pi) * integral over D of g_D(point, w) * laplacian(w).

    Polar coordinates centered at ``point``; rho = R s^2 removes the
    logarithmic singularity, so Gauss-Legendre in s converges quickly.
    ``laplacian`` is a vectorized callable or a constant.
    """
    x = complex(point)
    if abs(x) >= 1:
        raise ValueError("point must lie in the open unit disk")
    phi = 2.0 * math.pi * (np.arange(n_angular) + 0.5) / n_angular
    e = np.exp(1j * phi)
    b = np.real(np.conj(x) * e)
    R = -b + np.sqrt(b * b + 1 - abs(x) ** 2)  # distance to the circle along each ray
    nodes, weights = _gauss(n_radial)
    s = 0.5 * (nodes + 1.0)
    ws = 0.5 * weights
    rho = R[:, None] * s[None, :] ** 2
    w = x + rho * e[:, None]
    lap = laplacian(w) if callable(laplacian) else np.full(w.shape, float(laplacian))
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.log(rho) - np.log(np.abs(1 - x * np.conj(w)))
    # d(area) = rho d rho d phi, d rho = 2 R s ds
    integrand = g * lap * rho * 2.0 * R[:, None] * s[None, :]
    total = np.sum(integrand * ws[None, :]) * (2.0 * math.pi / n_angular)
    return float(total / (2.0 * math.pi))


def _boundary_flux(theta: float, n: int) -> float:
    """integral over D of the radial derivative of g_D(., y) at e^{i theta}.

    That derivative is the Poisson kernel (1 - |y|^2)/|eta - y|^2; polar
    coordinates centered at eta cancel its 1/t singularity.
    """
    eta = complex(math.cos(theta), math.sin(theta))
    nodes, weights = _gauss(n)
    # rays into the disk: directions eta * e^{i phi}, phi in (pi/2, 3pi/2)
    phi = math.pi * (1.0 + 0.5 * nodes)
    wphi = 0.5 * math.pi * weights
    d = eta * np.exp(1j * phi)
    tmax = -2.0 * np.real(np.conj(eta) * d)
    t = tmax[:, None] * 0.5 * (nodes[None, :] + 1.0)
    wt = tmax[:, None] * 0.5 * weights[None, :]
    y = eta + t * d[:, None]
    kern_t = (1 - np.abs(y) ** 2) / t  # Poisson kernel times the Jacobian t
    return float(np.sum(kern_t * wt * wphi[:, None]))


@lru_cache(maxsize=4)
def estimate_c(n: int = 64) -> float:
    """c = (1/2pi) inf_eta of the integrated boundary derivative of g_D."""
    thetas = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
    return min(_boundary_flux(float(th), n) for th in thetas) / (2.0 * math.pi)


def default_C() -> float:
    return 2.0**9 / estimate_c()


# -- potentials ------------------------------------------------------------------

@dataclass(frozen=True)
class BasePotential:
    C: float = field(default_factory=default_C)

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            lr = np.log(r)
        C = self.C
        out = np.where(r < 2, C * lr, np.where(r <= 3, np.maximum(C * lr, C * lr * lr), C * lr * lr))
        return out[()] if out.ndim == 0 else out

    def radial_deriv(self, r):
        r = np.asarray(r, dtype=float)
        lr = np.log(r)
        C = self.C
        lin = C / r
        sq = 2 * C * lr / r
        out = np.where(r < 2, lin, np.where(r <= 3, np.where(lr < 1, lin, sq), sq))
        return out[()] if out.ndim == 0 else out

    def __call__(self, z):
        return self.radial(np.abs(np.asarray(z, dtype=complex)))

    def laplacian(self, z):
        """Classical Laplacian off |z| = e and z = 0 (2C/|z|^2 where log^2 is active)."""
        r = np.abs(np.asarray(z, dtype=complex))
        out = np.where(r > math.e, 2 * self.C / np.maximum(r, 1e-300) ** 2, 0.0)
        return out[()] if out.ndim == 0 else out

    def grad(self, z):
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        return self.radial_deriv(r) * z / r


@dataclass(frozen=True)
class PunctureDisk:
    k: int
    A: float

    @property
    def center(self) -> float:
        return 2.0**self.k

    @property
    def radius(self) -> float:
        return 2.0 ** (self.k - 3)


@dataclass(frozen=True)
class _Extension:
    """Fourier form of P_D u_k: sum_n c_n rho^|n| e^{i n theta}."""
    coeffs: np.ndarray  # complex, n = 0..K
    orders: np.ndarray

    def value(self, zeta):
        rho = np.abs(zeta)
        th = np.angle(zeta)
        out = np.real(self.coeffs[0]) * np.ones_like(rho)
        for n, c in zip(self.orders[1:], self.coeffs[1:]):
            out = out + 2.0 * np.real(c * np.exp(1j * n * th)) * rho**n
        return out

    def radial_deriv(self, zeta):
        rho = np.abs(zeta)
        th = np.angle(zeta)
        out = np.zeros_like(rho)
        for n, c in zip(self.orders[1:], self.coeffs[1:]):
            out = out + 2.0 * n * np.real(c * np.exp(1j * n * th)) * rho ** (n - 1)
        return out


def _extension(base: BasePotential, disk: PunctureDisk, samples: int) -> _Extension:
    t = 2.0 * np.pi * np.arange(samples) / samples
    f = base(disk.center + disk.radius * np.exp(1j * t))
    c = np.fft.rfft(f) / samples
    mag = np.abs(c)
    # drop the FFT round-off floor; true coefficients decay like 8^-n
    keep = np.nonzero(mag > 1e-15 * max(mag[0], 1.0))[0]
    K = int(keep.max()) if keep.size else 0
    return _Extension(c[: K + 1], np.arange(K + 1))


@dataclass(frozen=True)
class PuncturedPotential:
    base: BasePotential
    disks: tuple
    extensions: tuple = field(repr=False, compare=False, default=())

    def disk_index(self, z):
        """Index of the disk containing z (closed disk interior), -1 outside."""
        z = np.asarray(z, dtype=complex)
        idx = np.full(z.shape, -1, dtype=int)
        for i, d in enumerate(self.disks):
            idx = np.where(np.abs(z - d.center) < d.radius, i, idx)
        return idx

    def is_puncture(self, z):
        z = np.asarray(z, dtype=complex)
        hit = np.zeros(z.shape, dtype=bool)
        for d in self.disks:
            hit |= z == d.center
        return hit

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.asarray(self.base(z), dtype=float).copy()
        for d, ext in zip(self.disks, self.extensions):
            m = np.abs(z - d.center) < d.radius
            if not np.any(m):
                continue
            zeta = (z[m] - d.center) / d.radius
            with np.errstate(divide="ignore"):
                val = ext.value(zeta) + d.A * np.log(np.abs(zeta))
            out[m] = np.where(np.isfinite(val), val, NEG_INF)
        return out[()] if out.ndim == 0 else out

    def inner_radial_deriv(self, i: int, theta):
        """d v/d rho from inside B_k at the boundary, in z units."""
        d, ext = self.disks[i], self.extensions[i]
        zeta = np.exp(1j * np.asarray(theta, dtype=float))
        return (ext.radial_deriv(zeta) + d.A) / d.radius

    def outer_radial_deriv(self, i: int, theta):
        d = self.disks[i]
        n = np.exp(1j * np.asarray(theta, dtype=float))
        g = self.base.grad(d.center + d.radius * n)
        return np.real(g * np.conj(n))

    def with_strengths(self, factor: float) -> "PuncturedPotential":
        disks = tuple(PunctureDisk(d.k, d.A * factor) for d in self.disks)
        return PuncturedPotential(self.base, disks, self.extensions)


def puncture_strength(base: BasePotential, k: int, c: float | None = None) -> float:
    """A_k = c r_k^2 inf_{B_k} Delta u0; the infimum sits at |z| = 2^k + r_k."""
    c = estimate_c() if c is None else c
    r = 2.0 ** (k - 3)
    far = 2.0**k + r
    if 2.0**k - r <= 3:
        raise ValueError(f"disk B_{k} is not inside |z| > 3")
    return c * r * r * 2 * base.C / far**2


def puncture(base: BasePotential, k_range, samples: int = BOUNDARY_SAMPLES,
             c: float | None = None) -> PuncturedPotential:
    ks = sorted(set(int(k) for k in k_range))
    disks = tuple(PunctureDisk(k, puncture_strength(base, k, c)) for k in ks)
    exts = tuple(_extension(base, d, samples) for d in disks)
    return PuncturedPotential(base, disks, exts)


# -- discrete verification -------------------------------------------------------

def ring_laplacian(fn, pts, h: float, M: int = 64):
    """4/h^2 * (mean of fn on the M-point circle of radius h - fn(center)).

    M = 4 is the 5-point stencil; larger M is exact on harmonic polynomials
    of degree < M, which keeps log singularities from dominating the error.
    """
    pts = np.asarray(pts, dtype=complex)
    ring = h * np.exp(2j * np.pi * np.arange(M) / M)
    acc = np.zeros(pts.shape)
    for q in ring:
        acc += fn(pts + q)
    return 4.0 / (h * h) * (acc / M - fn(pts))


@dataclass
class GridCheck:
    name: str
    h: float
    tol: float
    min_laplacian: float
    min_5point: float
    worst_point: complex
    points: int

    @property
    def ok(self) -> bool:
        return self.min_laplacian >= -self.tol

    def to_dict(self) -> dict:
        return {"name": self.name, "h": self.h, "tol": self.tol,
                "min_laplacian": self.min_laplacian, "min_5point": self.min_5point,
                "worst_point": [self.worst_point.real, self.worst_point.imag],
                "points": self.points, "ok": self.ok}


@dataclass
class SubharmonicReport:
    grids: list
    seams: list  # per disk: max of (inner - outer) radial derivative
    seam_tol: float
    ok: bool

    def to_dict(self) -> dict:
        return {"grids": [g.to_dict() for g in self.grids], "seams": self.seams,
                "seam_tol": self.seam_tol, "ok": self.ok}


def _grid_points(lo: complex, hi: complex, h: float):
    xs = np.arange(lo.real, hi.real + 0.5 * h, h)
    ys = np.arange(lo.imag, hi.imag + 0.5 * h, h)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return (X + 1j * Y).ravel()


def _check(v, name, pts, h, centers, M):
    keep = np.ones(pts.shape, dtype=bool)
    for c in centers:
        keep &= np.abs(pts - c) > 2 * h
    pts = pts[keep]
    lap = ring_laplacian(v, pts, h, M)
    five = ring_laplacian(v, pts, h, 4)
    i = int(np.argmin(lap))
    return GridCheck(name, h, 10 * h * h, float(lap[i]), float(np.min(five)), complex(pts[i]),
                     int(pts.size)), pts, lap


def verify_subharmonic(v, *, global_h: float = 0.5, disk_cells: int = 32, ring: int = 64,
                       seam_samples: int = 256, seam_tol: float | None = None,
                       raise_on_fail: bool = True) -> SubharmonicReport:
    """Discrete subharmonicity of a base or punctured potential.

    Each grid gets tolerance 10 h^2; points within 2h of the origin and of
    puncture centers are skipped.  Seams are tested through the radial
    derivative jump on every boundary circle.
    """
    disks = getattr(v, "disks", ())
    centers = [0j] + [complex(d.center) for d in disks]
    reach = max([16.0] + [d.center + 1.5 * d.radius for d in disks])
    grids, bad = [], []
    lo, hi = complex(-reach, -reach), complex(reach, reach)
    checks = [("global", _grid_points(lo, hi, global_h), global_h)]
    for d in disks:
        h = d.radius / disk_cells
        span = 1.5 * d.radius
        checks.append((f"disk k={d.k}", _grid_points(complex(d.center - span, -span),
                                                    complex(d.center + span, span), h), h))
    for name, pts, h in checks:
        g, p, lap = _check(v, name, pts, h, centers, ring)
        grids.append(g)
        if not g.ok:
            bad.extend(complex(q) for q in p[lap < -g.tol][:10])
    seams = []
    tol = seam_tol
    theta = 2.0 * np.pi * np.arange(seam_samples) / seam_samples
    for i, d in enumerate(disks):
        jump = v.inner_radial_deriv(i, theta) - v.outer_radial_deriv(i, theta)
        t = tol if tol is not None else 10 * (d.radius / disk_cells) ** 2
        j = int(np.argmax(jump))
        seams.append({"k": d.k, "max_jump": float(jump[j]), "tol": t, "ok": bool(jump[j] <= t)})
        if jump[j] > t:
            bad.append(complex(d.center + d.radius * np.exp(1j * theta[j])))
    ok = all(g.ok for g in grids) and all(s["ok"] for s in seams)
    rep = SubharmonicReport(grids, seams, tol if tol is not None else float("nan"), ok)
    if not ok and raise_on_fail:
        raise SubharmonicityViolation(
            f"discrete subharmonicity fails at {len(bad)} sampled points", points=tuple(bad))
    return rep


def circle_max(fn, center: complex, radius: float, samples: int = 512) -> float:
    t = 2.0 * np.pi * np.arange(samples) / samples
    return float(np.max(fn(center + radius * np.exp(1j * t))))


def disk_max(fn, center: complex, radius: float, n_r: int = 64, n_t: int = 256) -> float:
    """Max of fn over a polar sample of the closed disk."""
    r = radius * np.linspace(0.0, 1.0, n_r + 1)[1:]
    t = 2.0 * np.pi * np.arange(n_t) / n_t
    pts = center + r[:, None] * np.exp(1j * t)[None, :]
    return float(max(np.max(fn(pts)), np.max(fn(np.array([center])))))


def puncture_bounds(v: PuncturedPotential, deltas=(0.5, 0.25, 0.125)) -> list[dict]:
    """Max of v on |z - 2^k| = delta r_k against both puncture bounds.

    ``strength_bound`` is max_{B_k} u0 + A_k log delta, ``quadratic_bound`` is
    4 C k^2 + 4 log delta.  v is subharmonic, so the circle max equals the
    disk max.
    """
    out = []
    for d in v.disks:
        top = disk_max(v.base, d.center, d.radius)
        for delta in deltas:
            m = circle_max(v, d.center, delta * d.radius)
            lb = top + d.A * math.log(delta)
            qb = 4 * v.base.C * d.k**2 + 4 * math.log(delta)
            out.append({"k": d.k, "delta": delta, "max_v": m, "strength_bound": lb,
                        "quadratic_bound": qb, "ok": bool(m <= lb + 1e-9 * abs(lb) and m <= qb)})
    return out
