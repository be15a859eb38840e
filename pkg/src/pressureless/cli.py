"""Command-line front end.

Every run writes one CSV whose ``# key=value`` header holds the fully
resolved configuration; feeding that CSV back through ``--config`` repeats
the run.  Exit codes: 0 ok, 2 configuration, 3 numerical convergence,
4 audit failure under ``--strict``.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import re
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import blowup, hugoniot, kernel, riemann, sde, sticky
from .errors import AuditFailure, ConfigError, ConvergenceError, DomainError, GeometryError
from .fields import Grid, Piece, PiecewiseFunction, RiemannData, SmoothData, load_table, preset
from .flux import (FLUX_PRESETS, back_transform, direct_solution, density_residual, law_residual,
                   preset_flux, transform_problem, transformed_solution)

ENV_OUTPUT = "PGD_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_AUDIT = 0, 2, 3, 4
SUBCOMMANDS = ("mollified", "riemann", "blowup", "sticky", "oracle", "audit", "flux-demo")
# options that steer where output goes rather than what is computed
_NOT_RECORDED = {"config", "config_top", "output", "output_dir", "handler"}


# ---------------------------------------------------------------------------
# parsing helpers

def parse_grid(text, t=1.0):
    try:
        lo, hi, n = text.split(",")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ConfigError(f"grid must be 'lo,hi,n', got {text!r}") from None
    if not (hi > lo and n >= 2):
        raise ConfigError("grid needs hi > lo and n >= 2")
    return Grid.linspace(t, lo, hi, n)


def parse_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def parse_data(spec):
    """``riemann:f1,f2,u1,u2[,f3[,x0]]``, ``table:path``, ``expr:<velocity>``,
    or a preset name with optional ``:key=value,...`` parameters."""
    name, _, rest = spec.partition(":")
    if name == "riemann":
        vals = parse_floats(rest)
        if not 4 <= len(vals) <= 6:
            raise ConfigError("riemann data needs f1,f2,u1,u2 and optionally f3,x0")
        return RiemannData(*vals)
    if name == "table":
        if not rest:
            raise ConfigError("table data needs a path")
        return load_table(rest)
    if name == "expr":
        try:
            piece = Piece.from_expr(rest)
        except Exception as exc:
            raise ConfigError(f"cannot parse velocity expression {rest!r}: {exc}") from None
        return SmoothData(PiecewiseFunction.constant(1.0), PiecewiseFunction([], [piece]), rest)
    params = {}
    for item in filter(None, rest.split(",")):
        k, eq, v = item.partition("=")
        if not eq:
            raise ConfigError(f"preset parameter {item!r} must be key=value")
        params[k.strip()] = v
    try:
        return preset(name, **params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _flux(args):
    return preset_flux(args.flux)


def _apply_flux(data, flux):
    """Velocities on the command line are in ``v``; solvers run in ``u = G(v)``."""
    if flux.name == "identity":
        return data
    if isinstance(data, RiemannData):
        return transform_problem(data, flux=flux).riemann
    return transform_problem(data.u0, data.f0, flux).as_data()


def _pair(data, eps=None):
    if isinstance(data, RiemannData):
        return data.mollified(eps)
    return data.f0, data.u0


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# ---------------------------------------------------------------------------
# subcommands; each returns (columns, rows, results)

def cmd_mollified(args):
    data = _apply_flux(parse_data(args.data), _flux(args))
    grid = parse_grid(args.grid, args.t)
    if not args.t > 0:
        raise ConfigError("--t must be positive")
    if isinstance(data, RiemannData) and not args.eps > 0:
        raise ConfigError("--eps must be positive")
    f0, u0 = _pair(data, args.eps)
    L = args.L if args.L is not None else max(10.0, kernel.default_L(u0, args.t, args.sigma))
    pd = kernel.PhaseDensity(f0, u0, kernel.KernelParams(args.sigma, L, args.quad_tol))
    ms = [pd.moments(args.t, x) for x in grid.xs]
    cols = ["x", "rho", "u", "pressure"]
    rows = [[x, m.rho, m.u_hat, m.pressure] for x, m in zip(grid.xs, ms)]
    results = {"L": L}
    if isinstance(data, RiemannData) and data.is_constant:
        cols += ["rho_closed", "u_closed"]
        diff = 0.0
        for r in rows:
            t_ = riemann.mollified_terms(data, args.eps, args.sigma, args.t, r[0])
            r += [t_.rho, t_.u_hat]
            diff = max(diff, abs(t_.rho - r[1]), abs(t_.u_hat - r[2]))
        results["max_closed_form_diff"] = diff
    _add_v(args, cols, rows, col=2)
    return cols, rows, results


def _add_v(args, cols, rows, col):
    flux = _flux(args)
    if flux.name == "identity":
        return
    cols.append("v")
    for r in rows:
        r.append(float(flux.G_inverse(r[col])) if math.isfinite(r[col]) else math.nan)


def _riemann_data(args):
    base = parse_data(args.data) if args.data else RiemannData(1.0, 0.0, 0.0, -1.0)
    if not isinstance(base, RiemannData) or not base.is_constant:
        raise ConfigError("riemann needs constant-state data")
    vals = {k: getattr(args, k) for k in ("f1", "f2", "u1", "u2", "f3", "x0")}
    merged = {k: (v if v is not None else getattr(base, k)) for k, v in vals.items()}
    return RiemannData(**{k: float(v) for k, v in merged.items()})


def cmd_riemann(args):
    vdata = _riemann_data(args)
    flux = _flux(args)
    data = _apply_flux(vdata, flux)
    if not args.t > 0:
        raise ConfigError("--t must be positive")
    grid = parse_grid(args.grid, args.t)
    if args.fp_check:
        schedule = kernel.default_schedule(args.eps0, args.stages)
        kernel.check_schedule(schedule)
    sol = riemann.riemann_fp(data, args.t)
    cols = ["x", "rho", "u", "p"]
    p = hugoniot.spurious_pressure(data, args.t, grid.xs)
    rows = [[x, r, u, pv] for x, r, u, pv in zip(grid.xs, sol.rho(grid.xs), sol.u(grid.xs), p)]
    results = {"regime": sol.regime,
               "atoms": ";".join(f"{fmt(a)}@{fmt(b)}" for a, b in sol.atoms) or "none",
               "pressure_level": str(hugoniot.pressure_level(data))}
    if data.u2 < 0:
        results["middle_velocity"] = riemann.middle_velocity(data)
    if args.fp_check:
        fp, rep = kernel.fp_solution(data, grid, schedule)
        cols += ["rho_fp", "u_fp"]
        for r, a, b in zip(rows, fp.rho, fp.u):
            r += [a, b]
        eps = schedule[-1][0]
        keep = np.ones(grid.xs.size, dtype=bool)
        for b in sol.breakpoints:
            keep &= np.abs(grid.xs - b) > 2 * eps
        results["fp_max_rho_error"] = float(np.max(np.abs(fp.rho - sol.rho(grid.xs))[keep]))
        results["fp_max_u_error"] = float(np.max(np.abs(fp.u - sol.u(grid.xs))[keep]))
    _add_v(args, cols, rows, col=2)
    return cols, rows, results


def cmd_blowup(args):
    data = _apply_flux(parse_data(args.data), _flux(args))
    if isinstance(data, RiemannData):
        raise ConfigError("blowup needs smooth initial data")
    sigmas = parse_floats(args.sigmas)
    if not sigmas or min(sigmas) <= 0:
        raise ConfigError("--sigmas must be positive")
    rep = blowup.analyse(data.u0, data.f0)
    results = {"t_star": rep.t_star, "x_star": rep.x_star, "m": rep.m}
    if not math.isfinite(rep.t_star):
        raise ConfigError("the velocity never decreases: no blow-up")
    if rep.m == "linear-segment":
        results["A"] = rep.A
        L = max(10.0, kernel.default_L(data.u0, rep.t_star, max(sigmas)))
        rows = []
        phi = blowup.bump(args.delta, rep.x_star)
        for sg in sigmas:
            pd = kernel.PhaseDensity(data.f0, data.u0, kernel.KernelParams(sg, L, args.quad_tol))
            sc = sg * math.sqrt(rep.t_star)
            brk = rep.x_star + np.array([-args.delta, -10 * sc, 0.0, 10 * sc, args.delta])
            val = blowup.pair_density(pd, rep.t_star, phi, rep.x_star - args.delta,
                                      rep.x_star + args.delta, brk)
            rows.append([sg, val, rep.A * float(phi(rep.x_star))])
        return ["sigma", "pairing", "expected"], rows, results
    fit = blowup.scaling_exponent(data.u0, data.f0, sigmas, args.quad_tol, rep)
    results.update(B=rep.B, slope=fit.slope, expected_slope=fit.expected_slope,
                   prefactor=fit.prefactor, expected_prefactor=fit.expected_prefactor)
    rows = [[s, r] for s, r in zip(fit.sigmas, fit.rho)]
    return ["sigma", "rho"], rows, results


def cmd_sticky(args):
    flux = _flux(args)
    data = _apply_flux(parse_data(args.data), flux)
    if not args.t_end > 0 or not args.dt > 0:
        raise ConfigError("--t-end and --dt must be positive")
    if args.samples < 2:
        raise ConfigError("--samples must be at least 2")
    times = np.linspace(0.0, args.t_end, args.samples)
    results = {}
    if isinstance(data, RiemannData) and data.is_constant and args.solver != "general":
        states = [sticky.jump_trajectory_constant(data, t) for t in times]
    elif isinstance(data, RiemannData):
        states = sticky.jump_trajectory_general(data, args.t_end, args.dt, reading=args.reading)
    else:
        states, rep = sticky.post_blowup_evolution(data.u0, data.f0, args.t_end, args.dt,
                                                   reading=args.reading)
        results["t_star"] = rep.t_star
    cols = ["t", "x_j", "m", "v", "lax_ok", "flag"]
    rows = [[s.t, s.x_j, s.m, s.v, s.lax_ok, "|".join(s.flags) or "-"] for s in states]
    if args.oracle_n:
        if isinstance(data, RiemannData):
            fl, fr, ul, ur = data.one_sided()
            R = 1.5 * (max(abs(ul), abs(ur)) + abs(ur - ul)) * args.t_end + 0.25
            atoms = ((float(data.x0), float(data.f3), 0.0),) if data.f3 > 0 else ()
            x, m, v = sticky.discretise(data.density(), data.velocity(), args.oracle_n,
                                        data.x0 - R, data.x0 + R, atoms)
        else:
            w = args.oracle_window
            x, m, v = sticky.discretise(data.f0, data.u0, args.oracle_n, -w, w)
        snaps_t = [s.t for s in states]
        orc = sticky.sticky_particle_oracle(x, m, v, args.t_end, snaps_t)
        by_t = {t: (xs, ms) for t, xs, ms, _ in orc.snapshots}
        by_t[orc.t] = (orc.positions, orc.masses)
        cols += ["x_oracle", "m_oracle"]
        for r in rows:
            xs, ms = by_t.get(r[0], (orc.positions, orc.masses))
            k = int(np.argmax(ms))
            r += [float(xs[k]), float(ms[k])]
        last = rows[-1]
        results["dx_final"] = last[1] - last[6]
        results["dm_rel_final"] = (last[2] - last[7]) / last[7] if last[7] else math.nan
    if flux.name != "identity":
        cols.append("v_original")
        for r in rows:
            r.append(float(flux.G_inverse(r[3])) if math.isfinite(r[3]) else math.nan)
    return cols, rows, results


def cmd_oracle(args):
    data = _apply_flux(parse_data(args.data), _flux(args))
    dt = args.dt if args.dt is not None else 1e-3 * args.t
    cfg = sde.McConfig(args.paths, dt, args.sigma, args.seed, args.bandwidth)
    grid = parse_grid(args.grid, args.t)
    f0, u0 = _pair(data, args.eps)
    ens = sde.simulate(f0, u0, cfg, args.t, L=args.L)
    est = sde.estimate_fields(ens, grid)
    cols = ["x", "rho_est", "u_est", "stderr_rho", "stderr_u", "flagged"]
    rows = [list(r) for r in zip(grid.xs, est.rho_unnormalised, est.u, est.stderr_rho * est.mass,
                                 est.stderr_u, est.flagged)]
    results = {"bandwidth": est.bandwidth, "mass": est.mass}
    if args.check:
        cmp = sde.compare_with_quadrature(est, ens, f0, u0)
        ok = cmp.agree()
        cols += ["rho_quad", "u_quad", "agree"]
        for r, a, b, c in zip(rows, cmp.rho_ref, cmp.u_ref, ok):
            r += [a, b, c]
        results["fraction_within_3se"] = cmp.fraction_within()
        results["sigma_effective"] = sde.effective_sigma(args.sigma, args.t, est.bandwidth)
    _add_v(args, cols, rows, col=2)
    return cols, rows, results


def read_header(path):
    """``# key=value`` lines at the top of a CSV written by this tool."""
    out = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, eq, val = line[1:].strip().partition("=")
            if eq:
                out[key.strip()] = val.strip()
    return out


def cmd_audit(args):
    if args.input:
        head = read_header(args.input)
        if head.get("subcommand") not in ("riemann", "sticky", "mollified"):
            raise ConfigError(f"{args.input}: no riemann, sticky or mollified header found")
        if head.get("flux", "identity") != "identity":
            raise ConfigError("audits run in Burgers variables; re-run without --flux")
        if head["subcommand"] == "riemann":
            vals = {k: float(head[k]) for k in ("f1", "f2", "u1", "u2", "f3", "x0") if head.get(k)}
            base = parse_data(head["data"]) if head.get("data") else RiemannData(1.0, 0.0, 0.0, -1.0)
            data = RiemannData(**{k: vals.get(k, getattr(base, k)) for k in ("f1", "f2", "u1", "u2", "f3", "x0")})
            t = float(head["t"])
        else:
            data = parse_data(head["data"])
            t = float(head.get("t", head.get("t_end", "1")))
    else:
        data = parse_data(args.data)
        t = args.t
    if not isinstance(data, RiemannData) or not data.is_constant:
        raise ConfigError("audits need constant-state Riemann data")
    if not t > 0:
        raise ConfigError("audit time must be positive")
    t = Fraction(t).limit_denominator(10 ** 12) if args.rational_time else t
    cols = ["kind", "label", "position", "speed", "mass_residual", "momentum_residual",
            "momentum_residual_p0", "entropy_ok", "entropy_margin"]
    rows = []
    failed = False
    kinds = ("fp", "sticky") if args.kind == "both" else (args.kind,)
    if "fp" in kinds:
        sol = riemann.riemann_fp(data, float(t))
        for a, a0 in zip(hugoniot.audit_fp(data, t), hugoniot.audit_fp(data, t, with_pressure=False)):
            ok, margin = hugoniot.entropy_audit(sol.u, float(t), float(a.position))
            rows.append(["fp", a.label, a.position, a.speed, a.rh_mass_residual, a.rh_momentum_residual,
                         a0.rh_momentum_residual, ok, margin])
            failed |= not (a.passes and ok)
    if "sticky" in kinds and data.u2 < 0:
        a, _ = hugoniot.audit_sticky(data, t)
        vel = PiecewiseFunction.step(data.u1, data.u1 + data.u2, float(a.position))
        ok, margin = hugoniot.entropy_audit(vel, float(t), float(a.position))
        rows.append(["sticky", a.label, a.position, a.speed, a.rh_mass_residual, a.rh_momentum_residual,
                     a.rh_momentum_residual, ok, margin])
        failed |= not (a.passes and ok)
    if args.swap:
        x_s = data.x0 + (data.u1 + data.u2 / 2) * float(t)
        ok, margin = hugoniot.entropy_audit(riemann.order_swapped_velocity(data, float(t)), float(t), x_s)
        rows.append(["swapped", "order-swapped jump", x_s, data.u1 + data.u2 / 2, "-", "-", "-", ok, margin])
        failed |= not ok
    return cols, rows, {"audit_passed": not failed}


def cmd_flux_demo(args):
    flux = _flux(args)
    vdata = parse_data(args.data)
    if isinstance(vdata, RiemannData):
        raise ConfigError("flux-demo needs smooth velocity data, e.g. expr:1.5+0.5*tanh(x)")
    if not args.t > 0:
        raise ConfigError("--t must be positive")
    prob = transform_problem(vdata.u0, vdata.f0, flux)
    rt = flux.check()
    grid = parse_grid(args.grid, args.t)
    rows = []
    for x in grid.xs:
        g, v = transformed_solution(prob, args.t, x)
        res = law_residual(lambda tt, xx: transformed_solution(prob, tt, xx)[1], flux, args.t, x)
        rows.append([x, g, v, float(flux.G(v)), direct_solution(vdata.u0, flux, args.t, x), res,
                     density_residual(prob, args.t, x)])
    v0s = vdata.u0(grid.xs)
    back = back_transform(prob.u0, flux)(grid.xs)
    results = {"roundtrip_error": rt, "initial_roundtrip_error": float(np.max(np.abs(back - v0s))),
               "max_law_residual": max(abs(r[5]) for r in rows),
               "max_density_residual": max(abs(r[6]) for r in rows)}
    return ["x", "g", "v", "u", "v_direct", "law_residual", "density_residual"], rows, results


# ---------------------------------------------------------------------------
# parser and config

def _common(p):
    p.add_argument("--config", help="INI file with [common]/[<subcommand>] sections, or a CSV "
                                    "written by this tool (its header is replayed); flags win")
    p.add_argument("--output", help="output CSV path, '-' for stdout (default <output-dir>/<subcommand>.csv)")
    p.add_argument("--output-dir", help=f"output directory (default ${ENV_OUTPUT} or the current directory)")
    p.add_argument("--flux", default="identity", choices=FLUX_PRESETS,
                   help="flux map G: velocities given on the command line are v, solvers use u = G(v)")
    p.add_argument("--strict", action="store_true", help="exit 4 when an audit fails")


def build_parser():
    parser = argparse.ArgumentParser(prog="pressureless", description=__doc__.splitlines()[0])
    parser.add_argument("--config", dest="config_top", metavar="CONFIG",
                        help="configuration file (also accepted after the subcommand)")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    subs = {}

    p = subs["mollified"] = sub.add_parser("mollified", help="kernel fields at fixed (eps, sigma)")
    p.add_argument("--data", default="riemann:1,0,0,-1", help="initial data spec")
    p.add_argument("--eps", type=float, default=0.01, help="mollification half-width (length)")
    p.add_argument("--sigma", type=float, default=1e-4, help="noise amplitude (length / sqrt(time))")
    p.add_argument("--t", type=float, default=1.0, help="time (model time units)")
    p.add_argument("--grid", default="-2,2,81", help="'lo,hi,n' evaluation grid (length)")
    p.add_argument("--L", type=float, default=None, help="label truncation half-width (length, >= 10)")
    p.add_argument("--quad-tol", type=float, default=1e-10, help="quadrature tolerance (absolute)")
    p.set_defaults(handler=cmd_mollified)

    p = subs["riemann"] = sub.add_parser("riemann", help="exact free-particle Riemann solution")
    p.add_argument("--data", default=None, help="riemann:f1,f2,u1,u2[,f3[,x0]]; flags below override")
    for name, unit in (("f1", "density"), ("f2", "density jump"), ("u1", "velocity"),
                       ("u2", "velocity jump"), ("f3", "atom mass"), ("x0", "length")):
        p.add_argument(f"--{name}", type=float, default=None, help=f"{unit}")
    p.add_argument("--t", type=float, default=1.0, help="time (model time units)")
    p.add_argument("--grid", default="-2,2,81", help="'lo,hi,n' evaluation grid (length)")
    p.add_argument("--fp-check", action="store_true", help="also run the quadrature double limit")
    p.add_argument("--eps0", type=float, default=0.1, help="first schedule epsilon (length)")
    p.add_argument("--stages", type=int, default=6, help="schedule halvings (count)")
    p.set_defaults(handler=cmd_riemann)

    p = subs["blowup"] = sub.add_parser("blowup", help="density growth at the gradient catastrophe")
    p.add_argument("--data", default="tanh", help="smooth initial data spec")
    p.add_argument("--sigmas", default="0.1,0.031622776601683794,0.01,0.0031622776601683794,0.001",
                   help="comma-separated noise amplitudes (length / sqrt(time))")
    p.add_argument("--delta", type=float, default=0.02, help="test-function half-width for segments (length)")
    p.add_argument("--quad-tol", type=float, default=1e-10, help="quadrature tolerance (absolute)")
    p.set_defaults(handler=cmd_blowup)

    p = subs["sticky"] = sub.add_parser("sticky", help="delta-shock trajectory of sticky particles")
    p.add_argument("--data", default="riemann:1,1,0,-1", help="initial data spec")
    p.add_argument("--t-end", type=float, default=1.0, help="final time (model time units)")
    p.add_argument("--dt", type=float, default=1e-2, help="RK4 step for non-constant data (time)")
    p.add_argument("--samples", type=int, default=11, help="output times for the closed form (count)")
    p.add_argument("--solver", default="auto", choices=("auto", "general"),
                   help="'general' forces the quadrature solver on constant states")
    p.add_argument("--reading", default="jacobian", choices=("jacobian", "literal"),
                   help="segment-atom weight used by the general solver")
    p.add_argument("--oracle-n", type=int, default=0, help="particles in the discrete oracle (0 = off)")
    p.add_argument("--oracle-window", type=float, default=3.0,
                   help="half-width of the oracle window for smooth data (length)")
    p.set_defaults(handler=cmd_sticky)

    p = subs["oracle"] = sub.add_parser("oracle", help="Monte Carlo estimate of the kernel fields")
    p.add_argument("--data", default="riemann:1,1,0,-1", help="initial data spec")
    p.add_argument("--paths", type=int, default=100_000, help="number of sample paths (count)")
    p.add_argument("--sigma", type=float, default=0.05, help="noise amplitude (length / sqrt(time))")
    p.add_argument("--seed", type=int, default=0, help="64-bit RNG seed")
    p.add_argument("--t", type=float, default=1.0, help="time (model time units)")
    p.add_argument("--dt", type=float, default=None, help="nominal step (time); the update is exact")
    p.add_argument("--grid", default="-2.5,1.5,81", help="'lo,hi,n' evaluation grid (length)")
    p.add_argument("--bandwidth", type=float, default=None, help="KDE bandwidth (length; Silverman if unset)")
    p.add_argument("--eps", type=float, default=1e-3, help="mollification of Riemann data (length)")
    p.add_argument("--L", type=float, default=10.0, help="sampling half-width (length, >= 10)")
    p.add_argument("--check", action="store_true", help="compare with the quadrature fields")
    p.set_defaults(handler=cmd_oracle)

    p = subs["audit"] = sub.add_parser("audit", help="jump conditions and entropy check")
    p.add_argument("--input", default=None, help="CSV from riemann/sticky whose header defines the data")
    p.add_argument("--data", default="riemann:1,1,0,-1", help="Riemann data spec when no --input")
    p.add_argument("--t", type=float, default=1.0, help="time (model time units)")
    p.add_argument("--kind", default="both", choices=("fp", "sticky", "both"), help="which solution")
    p.add_argument("--swap", action="store_true", help="also audit the order-swapped limit")
    p.add_argument("--rational-time", action="store_true", help="treat t as a nearby rational")
    p.set_defaults(handler=cmd_audit)

    p = subs["flux-demo"] = sub.add_parser("flux-demo", help="solve v_t + G(v) v_x = 0 via u = G(v)")
    p.add_argument("--data", default="expr:1.5+0.5*tanh(x)", help="smooth velocity v0 (expr:... or preset)")
    p.add_argument("--t", type=float, default=0.3, help="time before blow-up (model time units)")
    p.add_argument("--grid", default="-2,2,41", help="'lo,hi,n' evaluation grid (length)")
    p.set_defaults(handler=cmd_flux_demo)

    for p in subs.values():
        _common(p)
    return parser, subs


def _dests(p):
    return {a.dest: a for a in p._actions if a.dest not in ("help", "handler")}


def load_config(path):
    """``{section: {key: value}}`` from an INI file or a CSV header."""
    text = Path(path).read_text()
    if text.lstrip().startswith("#"):
        head = read_header(path)
        name = head.pop("subcommand", None)
        if name not in SUBCOMMANDS:
            raise ConfigError(f"{path}: header has no valid subcommand")
        return {name: {k: v for k, v in head.items() if not k.startswith("result.")}}
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = {}
    for sec in cp.sections():
        if sec != "common" and sec not in SUBCOMMANDS:
            raise ConfigError(f"{path}: unknown section [{sec}]")
        out[sec] = dict(cp[sec])
    return out


def apply_config(config, subs):
    for sec, values in config.items():
        targets = subs.values() if sec == "common" else [subs[sec]]
        for p in targets:
            dests = _dests(p)
            upd = {}
            for key, val in values.items():
                dest = key.replace("-", "_")
                if dest not in dests:
                    raise ConfigError(f"unknown config key {key!r} in section [{sec}]")
                act = dests[dest]
                if isinstance(act, argparse._StoreTrueAction):
                    upd[dest] = val.strip().lower() in ("1", "true", "yes", "on")
                elif val == "":
                    upd[dest] = None
                else:
                    try:
                        upd[dest] = act.type(val) if act.type else val
                    except ValueError:
                        raise ConfigError(f"bad value {val!r} for config key {key!r}") from None
                    if act.choices and upd[dest] not in act.choices:
                        raise ConfigError(f"config key {key!r} must be one of {sorted(act.choices)}")
            p.set_defaults(**upd)


def resolved(args):
    out = {"subcommand": args.subcommand}
    for k, v in sorted(vars(args).items()):
        if k in _NOT_RECORDED or k == "subcommand":
            continue
        out[k] = "" if v is None else fmt(v)
    return out


def render_csv(config, cols, rows, results):
    lines = [f"# {k}={v}" for k, v in config.items()]
    lines += [f"# result.{k}={fmt(v)}" for k, v in results.items()]
    lines.append(",".join(cols))
    lines += [",".join(fmt(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def csv_body(text):
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def output_path(args):
    if args.output == "-":
        return None
    if args.output:
        return Path(args.output)
    base = args.output_dir or os.environ.get(ENV_OUTPUT) or "."
    return Path(base) / f"{args.subcommand}.csv"


def run(args):
    """Execute a parsed command; returns the exit code."""
    cols, rows, results = args.handler(args)
    text = render_csv(resolved(args), cols, rows, results)
    path = output_path(args)
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        print(f"wrote {path}", file=sys.stderr)
    if args.strict and results.get("audit_passed") is False:
        raise AuditFailure("audit failed")
    return EXIT_OK


_NEGATIVE = re.compile(r"^-\.?\d")


def _join_negative_values(argv):
    """``--grid -1,1,5`` -> ``--grid=-1,1,5`` so argparse does not read a flag."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _NEGATIVE.match(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None):
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    parser, subs = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv)
        if known.config:
            apply_config(load_config(known.config), subs)
        args = parser.parse_args(argv)
        return run(args)
    except (ConfigError, DomainError, GeometryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except AuditFailure as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return EXIT_AUDIT


if __name__ == "__main__":
    sys.exit(main())
