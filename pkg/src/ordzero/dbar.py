"""Minimum weighted-norm solutions of a discrete dbar equation.

Given disjoint disks D_k = B(2^k, 2^{k-2}), a cutoff chi equal to 1 on
B(2^k, 2^{k-3}) and the model map h = M * sum_{k in J} 1_{D_k}, the data
g = dbar(chi) h is supported on the annuli.  We find alpha minimizing
sum |alpha|^2 W subject to D alpha = g on interior grid nodes, where D is
the centered dbar stencil and

    W = e^{-u} / (1 + |z|^2)^2,   e^{-u} capped at ``weight_cap``,

with u a punctured potential that is -infinity at every node 2^k.  The
huge weight there pins alpha(2^k) to ~0, so f = chi h - alpha interpolates
h at the nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooCoarse, NoConvergence
from .growth import fit_growth
from .subharmonic import BasePotential, puncture

MIN_CELLS = 8


@dataclass(frozen=True)
class DbarConfig:
    grid_n: int = 512
    box_half_width: float = 32.0
    box_center: float = 8.0
    k_min: int = 2
    k_max: int = 5
    weight_cap: float = 1e12
    cg_tol: float = 1e-8
    cg_max_iter: int = 20000
    potential_C: float = 1.0
    polish_rounds: int = 3

    @property
    def h(self) -> float:
        return 2.0 * self.box_half_width / self.grid_n


# -- cutoff and model map --------------------------------------------------------

def smoothstep(t):
    """C^2 quintic 6t^5 - 15t^4 + 10t^3 clamped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6 * t - 15) + 10)


def smoothstep_deriv(t):
    inside = (t > 0) & (t < 1)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30 * t * t * (1 - t) ** 2, 0.0)


@dataclass(frozen=True)
class CutoffSpec:
    ks: tuple
    A: float  # measured max |grad chi| * 2^k

    @staticmethod
    def inner(k):
        return 2.0 ** (k - 3)

    @staticmethod
    def outer(k):
        return 2.0 ** (k - 2)

    def _t(self, k, z):
        rho = np.abs(z - 2.0**k)
        return rho, (self.outer(k) - rho) / (self.outer(k) - self.inner(k))

    def chi(self, z, ks=None):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape)
        for k in (self.ks if ks is None else ks):
            _, t = self._t(k, z)
            out += smoothstep(t)
        return out

    def dbar_chi(self, z, ks=None):
        """Analytic dbar chi = chi'(rho) (z - c) / (2 rho)."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for k in (self.ks if ks is None else ks):
            rho, t = self._t(k, z)
            dchi = -smoothstep_deriv(t) / (self.outer(k) - self.inner(k))
            with np.errstate(invalid="ignore", divide="ignore"):
                out += np.where(rho > 0, dchi * (z - 2.0**k) / (2 * rho), 0.0)
        return out


def build_cutoff(k_range) -> CutoffSpec:
    ks = tuple(sorted(set(int(k) for k in k_range)))
    if any(k < 2 for k in ks):
        raise ValueError("cutoff indices start at 2")
    measured = []
    for k in ks:
        rho = np.linspace(CutoffSpec.inner(k), CutoffSpec.outer(k), 2049)
        z = 2.0**k + rho
        g = 2 * np.abs(CutoffSpec(ks, 0.0).dbar_chi(z, (k,)))  # |grad chi| = 2|dbar chi|
        measured.append(float(np.max(g)) * 2.0**k)
    return CutoffSpec(ks, max(measured) if measured else 0.0)


@dataclass(frozen=True)
class ModelMap:
    J: tuple
    M: float

    def __post_init__(self):
        object.__setattr__(self, "J", tuple(sorted(set(int(k) for k in self.J))))
        if self.J and self.M > min(self.J) ** 2:
            raise ValueError(f"M={self.M} exceeds (min J)^2={min(self.J) ** 2}")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape)
        for k in self.J:
            out += self.M * (np.abs(z - 2.0**k) < 2.0 ** (k - 2))
        return out


# -- grid and operators ----------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    x: np.ndarray
    y: np.ndarray
    h: float

    @classmethod
    def from_config(cls, cfg: DbarConfig) -> "Grid":
        h = cfg.h
        x = cfg.box_center - cfg.box_half_width + h * np.arange(cfg.grid_n)
        y = -cfg.box_half_width + h * np.arange(cfg.grid_n)
        return cls(x, y, h)

    @property
    def Z(self) -> np.ndarray:
        return self.x[:, None] + 1j * self.y[None, :]

    def node(self, z: complex) -> tuple[int, int]:
        i = int(round((z.real - self.x[0]) / self.h))
        j = int(round((z.imag - self.y[0]) / self.h))
        if not (0 <= i < len(self.x) and 0 <= j < len(self.y)):
            raise ValueError(f"{z} lies outside the grid")
        return i, j


def dbar_op(a: np.ndarray, h: float) -> np.ndarray:
    """Centered dbar = (d/dx + i d/dy)/2 on interior nodes, zero on the rim."""
    out = np.zeros(a.shape, dtype=complex)
    out[1:-1, 1:-1] = ((a[2:, 1:-1] - a[:-2, 1:-1]) + 1j * (a[1:-1, 2:] - a[1:-1, :-2])) / (4 * h)
    return out


def dbar_adj(m: np.ndarray, h: float) -> np.ndarray:
    """Adjoint of :func:`dbar_op` for the plain complex inner product."""
    out = np.zeros(m.shape, dtype=complex)
    mi = m[1:-1, 1:-1] / (4 * h)
    out[2:, 1:-1] += mi
    out[:-2, 1:-1] -= mi
    out[1:-1, 2:] -= 1j * mi
    out[1:-1, :-2] += 1j * mi
    return out


def _interior(shape):
    m = np.zeros(shape, dtype=bool)
    m[1:-1, 1:-1] = True
    return m


def pcg(apply, precond, b, tol, max_iter, x0=None):
    """Preconditioned conjugate gradients for a Hermitian positive operator.

    Returns (x, iterations, relative recursive residual).
    """
    x = np.zeros_like(b) if x0 is None else x0.copy()
    bn = np.linalg.norm(b)
    if bn == 0:
        return x, 0, 0.0
    r = b - apply(x) if x0 is not None else b.copy()
    z = precond * r
    p = z.copy()
    rz = np.vdot(r, z).real
    rel = np.linalg.norm(r) / bn
    for it in range(1, max_iter + 1):
        Ap = apply(p)
        step = rz / np.vdot(p, Ap).real
        x += step * p
        r -= step * Ap
        rel = np.linalg.norm(r) / bn
        if rel <= tol:
            return x, it, rel
        z = precond * r
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, max_iter, rel


# -- problem, solve, certificate -------------------------------------------------

@dataclass
class DbarProblem:
    grid: Grid
    ew: np.ndarray   # capped e^{-u}
    W: np.ndarray    # ew / (1 + |z|^2)^2
    g: np.ndarray
    cutoff: CutoffSpec | None = None
    model: ModelMap | None = None
    config: DbarConfig = field(default_factory=DbarConfig)


def weight_fields(grid: Grid, cfg: DbarConfig):
    base = BasePotential(cfg.potential_C)
    v = puncture(base, range(cfg.k_min, cfg.k_max + 1))
    Z = grid.Z
    u = v(Z)
    with np.errstate(over="ignore"):
        ew = np.minimum(np.exp(-u), cfg.weight_cap)
    W = ew / (1 + np.abs(Z) ** 2) ** 2
    return ew, W


def assemble_rhs(cutoff: CutoffSpec, model: ModelMap, grid: Grid) -> np.ndarray:
    """g = dbar(chi) * h from the analytic dbar chi, only on annuli with k in J."""
    ks = [k for k in model.J if k in cutoff.ks]
    missing = [k for k in model.J if k not in cutoff.ks]
    if missing:
        raise ValueError(f"model indices {missing} have no cutoff")
    for k in ks:
        cells = (CutoffSpec.outer(k) - CutoffSpec.inner(k)) / grid.h
        if cells < MIN_CELLS:
            raise GridTooCoarse(f"annulus k={k} spans {cells:g} cells (< {MIN_CELLS})")
        c = 2.0**k
        if not (grid.x[0] < c - 2 * CutoffSpec.outer(k) and c + 2 * CutoffSpec.outer(k) < grid.x[-1]):
            raise GridTooCoarse(f"annulus k={k} is not inside the grid box")
    if not ks:
        return np.zeros((len(grid.x), len(grid.y)), dtype=complex)
    return cutoff.dbar_chi(grid.Z, ks) * model.M


def build_problem(cfg: DbarConfig, J=(3,), M: float = 9.0) -> DbarProblem:
    grid = Grid.from_config(cfg)
    cutoff = build_cutoff(range(cfg.k_min, cfg.k_max + 1))
    model = ModelMap(tuple(J), M)
    g = assemble_rhs(cutoff, model, grid)
    ew, W = weight_fields(grid, cfg)
    return DbarProblem(grid, ew, W, g, cutoff, model, cfg)


@dataclass
class SolveInfo:
    iterations: int
    polish_iterations: list
    residual: float        # ||D alpha - g|| / ||g|| on interior nodes
    recursive_residual: float


def solve_min_norm(problem: DbarProblem, cg_tol: float | None = None,
                   cg_max_iter: int | None = None, polish_rounds: int | None = None):
    """alpha = W^-1 D* mu with (D W^-1 D*) mu = g, then min-norm residual polish.

    The weighted dual system reaches its own tolerance but round-off from the
    1e12 weight spread leaves the true residual near 1e-8; each polish round
    adds the unweighted minimum-norm correction D* nu with (D D*) nu = r.
    """
    cfg = problem.config
    tol = cfg.cg_tol if cg_tol is None else cg_tol
    max_iter = cfg.cg_max_iter if cg_max_iter is None else cg_max_iter
    rounds = cfg.polish_rounds if polish_rounds is None else polish_rounds
    h = problem.grid.h
    inside = _interior(problem.g.shape)
    b = np.where(inside, problem.g, 0)
    bn = np.linalg.norm(b)
    if bn == 0:
        return np.zeros_like(b), SolveInfo(0, [], 0.0, 0.0)
    Winv = 1.0 / problem.W
    c = (1.0 / (4 * h)) ** 2
    diag = np.zeros(b.shape)
    diag[1:-1, 1:-1] = c * (Winv[2:, 1:-1] + Winv[:-2, 1:-1] + Winv[1:-1, 2:] + Winv[1:-1, :-2])
    pre = np.where(inside, 1.0 / np.where(diag > 0, diag, 1.0), 0.0)

    def apply(m):
        return dbar_op(Winv * dbar_adj(m, h), h)

    mu, its, rec = pcg(apply, pre, b, 0.1 * tol, max_iter)
    alpha = Winv * dbar_adj(mu, h)
    res = b - dbar_op(alpha, h)
    rel = np.linalg.norm(res) / bn
    polish = []
    pre0 = np.where(inside, 1.0 / (4 * c), 0.0)
    for _ in range(rounds):
        if rel <= tol:
            break
        nu, it2, _ = pcg(lambda m: dbar_op(dbar_adj(m, h), h), pre0, res, 1e-6, max_iter)
        alpha = alpha + dbar_adj(nu, h)
        res = b - dbar_op(alpha, h)
        rel = np.linalg.norm(res) / bn
        polish.append(it2)
    if rel > tol:
        raise NoConvergence(f"dbar residual {rel:.3e} above {tol:g} after {its} iterations",
                            residual=rel)
    return alpha, SolveInfo(its, polish, float(rel), float(rec))


def weighted_norm(alpha, W, h) -> float:
    return float(np.sum(np.abs(alpha) ** 2 * W) * h * h)


def cauchy_transform(g: np.ndarray, h: float) -> np.ndarray:
    """(1/pi) sum g(w) h^2 / (z - w) by FFT convolution on the same grid."""
    n, m = g.shape
    ix = np.arange(-(n - 1), n) * h
    iy = np.arange(-(m - 1), m) * h
    K = ix[:, None] + 1j * iy[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.where(K == 0, 0, h * h / (math.pi * K))
    P, Qs = 2 * n - 1 + n - 1, 2 * m - 1 + m - 1
    P, Qs = 1 << (P - 1).bit_length(), 1 << (Qs - 1).bit_length()
    full = np.fft.ifft2(np.fft.fft2(g, (P, Qs)) * np.fft.fft2(K, (P, Qs)))
    return full[n - 1:2 * n - 1, m - 1:2 * m - 1]


def project_to_constraint(a: np.ndarray, b: np.ndarray, h: float, rounds: int = 3,
                          tol: float = 1e-12) -> np.ndarray:
    """a + D* nu with (D D*) nu = b - D a: nearest field meeting the constraint."""
    inside = _interior(b.shape)
    pre0 = np.where(inside, 4.0 * h * h, 0.0)
    bn = np.linalg.norm(b)
    for _ in range(rounds):
        res = b - dbar_op(a, h)
        if bn == 0 or np.linalg.norm(res) / bn <= tol:
            break
        nu, _, _ = pcg(lambda m: dbar_op(dbar_adj(m, h), h), pre0, res, 1e-8, 20000)
        a = a + dbar_adj(nu, h)
    return a


def I_majorant(A: float, C: float, kmax: int = 200) -> float:
    """A^2 (3 pi/64) sum_{k>=1} k^4 e^{-C (k-1)^2}."""
    return A * A * 3 * math.pi / 64 * sum(k**4 * math.exp(-C * (k - 1) ** 2) for k in range(1, kmax))


@dataclass
class DbarSolution:
    problem: DbarProblem
    alpha: np.ndarray
    info: SolveInfo
    f: np.ndarray

    def f_at(self, z: complex) -> complex:
        return complex(self.f[self.problem.grid.node(complex(z))])


def assemble_f(problem: DbarProblem, alpha: np.ndarray, info: SolveInfo) -> DbarSolution:
    chi_h = problem.cutoff.chi(problem.grid.Z, problem.model.J) * problem.model.M
    return DbarSolution(problem, alpha, info, chi_h - alpha)


def solve_problem(cfg: DbarConfig, J=(3,), M: float = 9.0) -> DbarSolution:
    prob = build_problem(cfg, J, M)
    alpha, info = solve_min_norm(prob)
    return assemble_f(prob, alpha, info)


def interpolation_report(sol: DbarSolution) -> list[dict]:
    cfg = sol.problem.config
    out = []
    for k in range(cfg.k_min, cfg.k_max + 1):
        z = complex(2**k)
        target = float(sol.problem.model(z))
        val = sol.f_at(z)
        out.append({"k": k, "target": target, "f": [val.real, val.imag], "error": abs(val - target)})
    return out


GROWTH_RADII = (1, 2, 3, 4, 6, 8, 12, 16, 20, 24)


def growth_certificate(sol: DbarSolution, radii=None, samples: int = 1024) -> dict:
    """Sampled max |f| on circles |z| = r (bilinear lookup) and a log^2 fit.

    By default the radii are those of GROWTH_RADII whose circles fit in the box.
    """
    grid = sol.problem.grid
    h = grid.h
    if radii is None:
        reach = min(-grid.x[0], grid.x[-1], -grid.y[0], grid.y[-1])
        radii = tuple(r for r in GROWTH_RADII if r <= reach)
        if len(radii) < 2:
            raise ValueError("grid box holds fewer than two growth circles around 0")
    out = []
    for r in radii:
        z = r * np.exp(2j * np.pi * np.arange(samples) / samples)
        fx = (z.real - grid.x[0]) / h
        fy = (z.imag - grid.y[0]) / h
        if fx.min() < 0 or fy.min() < 0 or fx.max() > len(grid.x) - 1 or fy.max() > len(grid.y) - 1:
            raise ValueError(f"radius {r} leaves the grid box")
        i = np.minimum(np.floor(fx).astype(int), len(grid.x) - 2)
        j = np.minimum(np.floor(fy).astype(int), len(grid.y) - 2)
        tx, ty = fx - i, fy - j
        f = sol.f
        val = ((1 - tx) * (1 - ty) * f[i, j] + tx * (1 - ty) * f[i + 1, j]
               + (1 - tx) * ty * f[i, j + 1] + tx * ty * f[i + 1, j + 1])
        out.append(float(np.max(np.abs(val))))
    logs = [math.log(max(m, 1e-300)) for m in out]
    c, const = fit_growth(radii, logs)
    return {"radii": list(radii), "max_abs_f": out, "c_fit": c, "const_fit": const}


def certificate(sol: DbarSolution, *, cauchy: bool = True) -> dict:
    """Residual, weighted-L2 inequality, interpolation and growth in one dict."""
    p = sol.problem
    h = p.grid.h
    inside = _interior(p.g.shape)
    b = np.where(inside, p.g, 0)
    bn = float(np.linalg.norm(b))
    lhs = weighted_norm(sol.alpha, p.W, h)
    rhs = float(np.sum(np.abs(p.g) ** 2 * p.ew) * h * h)
    slack = max(0.0, 2 * lhs / rhs - 1.0) if rhs > 0 else 0.0
    df = dbar_op(sol.f, h)
    interp = interpolation_report(sol)
    cert = {
        "grid_n": len(p.grid.x), "h": h, "J": list(p.model.J), "M": p.model.M,
        "residual": sol.info.residual,
        "cg_iterations": sol.info.iterations,
        "polish_iterations": sol.info.polish_iterations,
        "hormander_lhs": lhs,
        "hormander_rhs": rhs,
        "hormander_slack": slack,
        "I_diagnostic": rhs,
        "I_majorant": I_majorant(p.cutoff.A, p.config.potential_C),
        "cutoff_A": p.cutoff.A,
        "dbar_f_relative": float(np.linalg.norm(np.where(inside, df, 0))) / bn if bn else 0.0,
        "interpolation_errors": [e["error"] for e in interp],
        "interpolation": interp,
    }
    if cauchy:
        ac = cauchy_transform(p.g, h)
        cres = float(np.linalg.norm(np.where(inside, dbar_op(ac, h) - p.g, 0))) / bn if bn else 0.0
        # the continuum oracle meets the stencil only up to truncation error;
        # its unweighted projection onto the constraint set is a competitor
        proj = project_to_constraint(ac, b, h)
        pres = float(np.linalg.norm(b - dbar_op(proj, h))) / bn if bn else 0.0
        cert["cauchy_residual"] = cres
        cert["cauchy_projected_residual"] = pres
        cert["cauchy_weighted_norm"] = weighted_norm(proj, p.W, h)
        cert["min_norm_not_above_cauchy"] = bool(lhs <= cert["cauchy_weighted_norm"])
    g = growth_certificate(sol)
    cert["growth"] = g
    cert["c_fit"] = g["c_fit"]
    return cert
