"""Build, verify and report pipelines behind the command line.

Every ``run_*`` function writes its artifacts under ``out`` and returns the
report dict it wrote; ``report["ok"]`` is the pass/fail verdict.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .cs_builder import build_cs, log_abs_G, zero_lattice
from .dbar import DbarConfig, assemble_f, build_problem, certificate, solve_min_norm
from .dispatcher import build_dispatchers, dispatcher_sum
from .dynamics import assemble_F, count_report
from .errors import OrdZeroError
from .growth import envelope, fixed_slope_constant, growth_report
from .jsonio import read_json, write_csv, write_json
from .products import Schedule, TruncationPolicy
from .subharmonic import (NEG_INF, BasePotential, estimate_c, puncture, puncture_bounds,
                          verify_subharmonic)
from . import svg

ARTIFACTS = {
    "build": "build.json",
    "verify": "count_report.json",
    "growth": "growth.json",
    "dbar-demo": "dbar_certificate.json",
    "puncture-demo": "puncture_report.json",
    "zeros": "zeros.json",
    "dispatcher": "dispatcher.json",
}


def make_schedule(cfg: RunConfig) -> Schedule:
    s = cfg.schedule
    return Schedule.from_sequences(s.periods, s.rates, s.start_index)


def make_policy(cfg: RunConfig) -> TruncationPolicy:
    return TruncationPolicy(cfg.truncation.eps, cfg.truncation.max_terms)


def make_map(cfg: RunConfig):
    s = make_schedule(cfg)
    pol = make_policy(cfg)
    cs = build_cs(s, pol, cfg.precision_bits)
    ds = build_dispatchers(s, pol)
    return cs, ds, assemble_F(cs, ds)


def make_dbar_config(cfg: RunConfig) -> DbarConfig:
    d = cfg.dbar
    return DbarConfig(grid_n=d.grid_n, box_half_width=d.box_half_width, box_center=d.box_center,
                      k_min=d.k_min, k_max=d.k_max, weight_cap=d.weight_cap, cg_tol=d.cg_tol,
                      cg_max_iter=d.cg_max_iter, potential_C=d.potential_C)


def _schedule_block(s: Schedule) -> dict:
    out = s.to_dict()
    out["normalized"] = list(s.rates) != list(s.original_rates)
    out["polynomial_factor_counts"] = list(s.lattice_sizes)  # m_n * p_n
    out["degree_rule_values"] = list(s.degrees)  # m_n + p_n, used for l_n
    return out


def run_build(cfg: RunConfig, out: Path) -> dict:
    cs, ds, F = make_map(cfg)
    s = cs.schedule
    rep = {
        "schedule": _schedule_block(s),
        "precision_bits": cs.precision_bits,
        "truncation": {"eps": cs.policy.eps, "max_terms": cs.policy.max_terms},
        "dispatchers": [{"m": d.m, "M": d.M, "kind": d.kind,
                         "c_fit": d.growth["c_fit"], "const_fit": d.growth["const_fit"],
                         "uniform_constant": d.growth["uniform_constant"]} for d in ds],
        "lattice_points": len(zero_lattice(cs)),
        "ok": True,
    }
    write_json(out / ARTIFACTS["build"], rep)
    return rep


def run_verify(cfg: RunConfig, out: Path) -> dict:
    _, _, F = make_map(cfg)
    rep = count_report(F, tol=cfg.ppp.orbit_tol, newton=cfg.ppp.newton,
                       newton_tol=cfg.ppp.newton_tol)
    d = rep.to_dict()
    write_json(out / ARTIFACTS["verify"], d)
    groups = []
    for lv in rep.levels:
        xs = [r.point.z.real for r in lv.records]
        ys = [r.point.z.imag for r in lv.records]
        groups.append((f"n={lv.n}, p={lv.period}: {len(lv.records)} verified", xs, ys))
    svg.scatter(out / "verify.svg", groups, "verified primitive periodic points (z-plane)",
                "Re z", "Im z")
    return d


def _growth_block(log_abs, radii, density, stability: bool, c40: float | None):
    rep = growth_report(log_abs, radii, density)
    block = rep.to_dict()
    block["dominates"] = rep.dominates()
    block["finite"] = math.isfinite(rep.c_fit) and math.isfinite(rep.const_fit)
    if c40 is not None:
        block["fixed_c"] = c40
        block["fixed_c_const"] = fixed_slope_constant(radii, rep.log_samples, c40)
    if stability:
        dense = [2 * density[0], 2 * density[1], 2 * density[2]]
        rep2 = growth_report(log_abs, radii, dense)
        block["dense"] = {"density": dense, "c_fit": rep2.c_fit, "const_fit": rep2.const_fit,
                          "log_max": rep2.log_samples}
        if c40 is not None:
            k2 = fixed_slope_constant(radii, rep2.log_samples, c40)
            block["dense"]["fixed_c_const"] = k2
            k1 = block["fixed_c_const"]
            block["fixed_c_const_rel_change"] = abs(k2 - k1) / abs(k1) if k1 else abs(k2 - k1)
        block["c_fit_rel_change"] = (abs(rep2.c_fit - rep.c_fit) / rep.c_fit
                                     if rep.c_fit else abs(rep2.c_fit))
    return rep, block


def run_growth(cfg: RunConfig, out: Path) -> dict:
    cs, _, F = make_map(cfg)
    g = cfg.growth
    radii = list(g.radii)
    rep_g, bg = _growth_block(lambda z, w: log_abs_G(cs, z, w), radii, g.density,
                              g.stability_check, g.envelope_constant)
    rep_f, bf = _growth_block(F.log_abs, radii, g.density, g.stability_check, None)
    bg["ok"] = bool(bg["finite"] and bg.get("fixed_c_const_rel_change", 0.0) <= 0.1)
    bf["ok"] = bool(bf["finite"] and bf["dominates"])
    rep = {"G": bg, "F": bf, "ok": bool(bg["ok"] and bf["ok"])}
    write_json(out / ARTIFACTS["growth"], rep)
    rows = []
    for name, r in (("G", rep_g), ("F", rep_f)):
        env = envelope(r.radii, r.c_fit, r.const_fit)
        rows += [(name, float(x), float(y), float(e)) for x, y, e in zip(r.radii, r.log_samples, env)]
    write_csv(out / "growth.csv", ["map", "r", "log_max", "envelope"], rows)
    L = [math.log(r + 1) ** 2 for r in radii]
    svg.lines(out / "growth.svg", [
        ("log M_G", L, rep_g.log_samples, False),
        (f"{g.envelope_constant:g} log^2(r+1) + C", L,
         list(g.envelope_constant * np.array(L) + bg["fixed_c_const"]), True),
        ("log M_F", L, rep_f.log_samples, False),
        ("F envelope", L, list(envelope(radii, rep_f.c_fit, rep_f.const_fit)), True),
    ], "maximum modulus against log^2(r+1)", "log^2(r+1)", "log M")
    return rep


def run_dbar(cfg: RunConfig, out: Path) -> dict:
    dc = make_dbar_config(cfg)
    prob = build_problem(dc, tuple(cfg.dbar.J), cfg.dbar.M)
    alpha, info = solve_min_norm(prob)
    sol = assemble_f(prob, alpha, info)
    cert = certificate(sol)
    M = cfg.dbar.M
    cert["interpolation_tol"] = cfg.dbar.interpolation_tol * M
    cert["checks"] = {
        "residual": cert["residual"] <= dc.cg_tol,
        "hormander": cert["hormander_slack"] <= 1.0,
        "interpolation": max(cert["interpolation_errors"]) <= cert["interpolation_tol"],
        "cauchy_competitor": cert["min_norm_not_above_cauchy"],
    }
    cert["ok"] = all(cert["checks"].values())
    write_json(out / ARTIFACTS["dbar-demo"], cert)
    X, Y = np.meshgrid(prob.grid.x, prob.grid.y, indexing="ij")
    f = sol.f
    write_csv(out / "dbar_f.csv", ["x", "y", "re", "im"],
              zip(X.ravel().tolist(), Y.ravel().tolist(), f.real.ravel().tolist(),
                  f.imag.ravel().tolist()))
    return cert


def run_puncture(cfg: RunConfig, out: Path) -> dict:
    pc = cfg.puncture
    base = BasePotential(pc.C) if pc.C is not None else BasePotential()
    v = puncture(base, range(pc.k_min, pc.k_max + 1))
    sub = verify_subharmonic(v, global_h=pc.global_h, disk_cells=pc.disk_cells,
                             raise_on_fail=False)
    bounds = puncture_bounds(v)
    rep = {
        "c_estimate": estimate_c(),
        "C": base.C,
        "disks": [{"k": d.k, "center": d.center, "radius": d.radius, "A": d.A} for d in v.disks],
        "subharmonic": sub.to_dict(),
        "bounds": bounds,
        "ok": bool(sub.ok and all(b["ok"] for b in bounds)),
    }
    write_json(out / ARTIFACTS["puncture-demo"], rep)
    reach = 2.0**pc.k_max * 1.25
    hh = pc.heightfield_h
    xs = np.arange(-reach, reach + 0.5 * hh, hh)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    Z = X + 1j * Y
    V = v(Z)
    punct = v.is_puncture(Z)
    write_csv(out / "puncture.csv", ["x", "y", "v", "puncture"],
              zip(X.ravel().tolist(), Y.ravel().tolist(), V.ravel().tolist(),
                  punct.ravel().astype(int).tolist()))
    Vp = np.where(V <= NEG_INF, np.nan, V)
    svg.contour_map(out / "puncture.svg", xs, xs, Vp, svg.log_levels(Vp, 16),
                    "level lines of the punctured potential", [(d.center, 0.0) for d in v.disks])
    return rep


def run_zeros(cfg: RunConfig, out: Path) -> dict:
    cs = build_cs(make_schedule(cfg), make_policy(cfg), cfg.precision_bits)
    pts = zero_lattice(cs)
    s = cs.schedule
    rep = {"schedule": _schedule_block(s), "count": len(pts),
           "points": [p.to_dict() for p in pts], "ok": True}
    write_json(out / ARTIFACTS["zeros"], rep)
    groups = []
    for n in s.levels:
        lv = [p for p in pts if p.n == n]
        groups.append((f"w=2^{n}: p={s.period(n)}, m={s.rate(n)}",
                       [p.z.real for p in lv], [p.z.imag for p in lv]))
    svg.scatter(out / "zeros.svg", groups, "zero lattice of G by level", "Re z", "Im z")
    return rep


def run_dispatcher(cfg: RunConfig, out: Path) -> dict:
    s = make_schedule(cfg)
    ds = build_dispatchers(s, make_policy(cfg))
    nodes = list(range(s.start_index, s.levels[-1] + 3))
    tables = []
    ok = True
    for d in ds:
        row = []
        for n in nodes:
            val = complex(d(float(2**n)))
            want = d.M if n == d.m else 0.0
            ok &= val == want
            row.append({"n": n, "value": [val.real, val.imag], "expected": want})
        tables.append({"m": d.m, "M": d.M, "kind": d.kind, "nodes": row,
                       "growth": {k: d.growth[k] for k in ("c_fit", "const_fit",
                                                             "max_logM_over_log2r", "note")}})
    sums = []
    for n in nodes:
        val = complex(dispatcher_sum(s, ds, float(2**n)))
        want = 1.0 if n in s.levels else 0.0
        ok &= val == want
        sums.append({"n": n, "value": [val.real, val.imag], "expected": want})
    rep = {"dispatchers": tables, "sum_at_nodes": sums, "ok": bool(ok)}
    write_json(out / ARTIFACTS["dispatcher"], rep)
    return rep


def run_report(cfg: RunConfig, out: Path) -> dict:
    found = {}
    for name, fname in ARTIFACTS.items():
        p = out / fname
        if p.exists():
            found[name] = read_json(p)
    if not found:
        raise OrdZeroError("nothing to aggregate")
    summary = {name: bool(r.get("ok", False)) for name, r in found.items()}
    rep = {
        "tool": "ordzero",
        "version": __version__,
        "config": cfg.model_dump(mode="json"),
        "modules": found,
        "summary": summary,
        "ok": all(summary.values()),
        "timings_file": "timings.json",
    }
    write_json(out / "run_report.json", rep)
    return rep


RUNNERS = {
    "build": run_build,
    "verify": run_verify,
    "growth": run_growth,
    "dbar-demo": run_dbar,
    "puncture-demo": run_puncture,
    "zeros": run_zeros,
    "dispatcher": run_dispatcher,
    "report": run_report,
}
