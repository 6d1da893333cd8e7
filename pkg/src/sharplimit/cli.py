"""Command-line entry point: `sharplimit <subcommand> [options]`."""
import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .asymptotic import ApproxBuilder
from .diffuse import DiffuseSolver, DiffuseState, SchemeParams, SCHEMES
from .errors import InvalidArgumentError, SharpLimitError
from .harness import (RunConfig, diffuse_domain, emit, fmt, impose_initial, residual_ladder,
                      run_ladder, sharp_history)
from .profile import potential_derivative, surface_tension, surface_tension_whole_line, theta
from .spectral import EigenProblem, eigenfunction_deviation, lambda1_decay_study, solve_lowest_pairs


def _csv_list(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _write_rows(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _config(args):
    base = RunConfig.from_file(args.config) if args.config else RunConfig()
    over = {k: getattr(args, k, None) for k in ("out", "workers", "seed", "dim", "R0", "r_out", "T", "dt",
                                                "order", "delta", "scheme", "variant", "sharp_n",
                                                "sharp_dt", "points_per_eps", "snapshots")}
    if getattr(args, "ladder", None):
        over["ladder"] = args.ladder
    return RunConfig.from_mapping({k: v for k, v in over.items() if v is not None}, base)


# ------------------------------------------------------------------ commands
def cmd_profile(args, cfg):
    z = np.linspace(-args.half_width, args.half_width, args.nodes)
    th = theta(z)
    ode = np.abs(theta(z, 2) - potential_derivative(th, 1)).max()
    first = np.abs(theta(z, 1) - np.sqrt(2.0 * potential_derivative(th))).max()
    rows = [("max_second_order_residual", float(ode)), ("max_first_order_residual", float(first)),
            ("surface_tension", surface_tension()), ("surface_tension_whole_line", surface_tension_whole_line()),
            ("closed_form", 4.0 * np.sqrt(2.0) / 3.0)]
    path = _write_rows(os.path.join(cfg.out, "profile.csv"), ["quantity", "value"], rows)
    for k, v in rows:
        print(f"{k},{fmt(v)}")
    return [path]


def cmd_spectral(args, cfg):
    study = lambda1_decay_study(args.eps, n=args.n, stencil=args.stencil, workers=cfg.workers)
    rows = []
    for eps in args.eps:
        res = solve_lowest_pairs(EigenProblem(eps, args.n), 2, stencil=args.stencil)
        rows.append((float(eps), res.lambda1, res.lambda2, eigenfunction_deviation(res)))
    path = _write_rows(os.path.join(cfg.out, "spectral.csv"),
                       ["eps", "lambda1", "lambda2", "eigenfunction_deviation"], rows)
    for r in rows:
        print(",".join(fmt(v) for v in r))
    print(f"log|lambda1| vs 1/eps slope,{fmt(study.slope)}")
    return [path]


def cmd_sharp(args, cfg):
    hist = sharp_history(replace(cfg, order=1 if args.order1 else 0))
    rows = []
    every = max(1, int(round(cfg.T / cfg.sharp_dt / cfg.snapshots)))
    for k in range(0, len(hist.traj.states), every):
        s, o1 = hist.traj.states[k], hist.order1[k]
        rows.append((s.t, s.R, s.V, s.mu[s.m], o1.d1))
    path = _write_rows(os.path.join(cfg.out, "sharp.csv"), ["t", "R", "V", "mu_front", "d1"], rows)
    print(f"R(T),{fmt(hist.traj.states[-1].R)}")
    print(f"d1(T),{fmt(hist.order1[-1].d1)}")
    return [path]


def cmd_construct(args, cfg):
    hist = sharp_history(cfg)
    r = diffuse_domain(cfg, args.eps).uniform_nodes()
    b = ApproxBuilder(hist, r, args.eps, cfg.order, cfg.delta_value, cfg.variant)
    approx = b.build(args.time)
    norms = approx.norms()
    out = [_write_rows(os.path.join(cfg.out, "construct.csv"), ["quantity", "value"],
                       [(k, norms[k]) for k in sorted(norms)])]
    for k in sorted(norms):
        print(f"{k},{fmt(norms[k])}")
    if args.profile:
        rows = zip(r, approx.u, approx.mu, approx.sigma, approx.phi, approx.u_bar, approx.layer)
        out.append(_write_rows(os.path.join(cfg.out, "construct_profile.csv"),
                               ["r", "u_A", "mu_A", "sigma_A", "phi_A", "u_bar", "layer"], rows))
    return out


def cmd_diffuse(args, cfg):
    dom = diffuse_domain(cfg, args.eps)
    solver = DiffuseSolver(dom)
    if args.init == "construct":
        hist = sharp_history(cfg)
        b = ApproxBuilder(hist, solver.r, args.eps, cfg.order, cfg.delta_value, cfg.variant)
        u0, s0 = impose_initial(b.build(0.0, residuals=False))
    else:
        u0 = theta((solver.r - cfg.R0) / args.eps)
        s0 = np.zeros_like(u0)
    params = SchemeParams(cfg.dt, args.eps, cfg.scheme)
    traj = solver.run(DiffuseState(0.0, u0, s0, args.eps), params, cfg.T, cfg.snapshot_times())
    keys = ["t", "interface", "mass", "max_abs_u", "max_abs_sigma", "energy"]
    path = _write_rows(os.path.join(cfg.out, "diffuse.csv"), keys, [[float(row[k]) for k in keys] for row in traj.rows])
    print(f"max_mass_drift,{fmt(traj.max_mass_drift)}")
    print(f"interface(T),{fmt(traj.rows[-1]['interface'])}")
    return [path]


def cmd_converge(args, cfg):
    hist = sharp_history(cfg)
    report = run_ladder(cfg, hist)
    if args.residuals:
        res = residual_ladder(cfg, hist)
        report.meta.update({f"residual_order_{k}": v[0] for k, v in res.rates.items()})
    paths = emit(report, cfg)
    for name in sorted(report.rates):
        print(f"rate,{name},{fmt(report.rates[name][0])}")
    return paths


# ------------------------------------------------------------------ parser
def build_parser():
    p = argparse.ArgumentParser(prog="sharplimit", description="Sharp-interface limit laboratory.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes for independent jobs")
    p.add_argument("--seed", type=int, help="seed for property-test inputs (recorded only)")
    sub = p.add_subparsers(dest="command", required=True)

    def geometry(sp):
        sp.add_argument("--dim", type=int, choices=(1, 2, 3))
        sp.add_argument("--R0", type=float)
        sp.add_argument("--r-out", dest="r_out", type=float)
        sp.add_argument("--T", type=float)
        sp.add_argument("--sharp-n", dest="sharp_n", type=int)
        sp.add_argument("--sharp-dt", dest="sharp_dt", type=float)

    def construction(sp):
        sp.add_argument("--order", type=int, choices=(0, 1))
        sp.add_argument("--delta", type=float)
        sp.add_argument("--variant", choices=("bump", "poly7"))
        sp.add_argument("--points-per-eps", dest="points_per_eps", type=int)
        sp.add_argument("--snapshots", type=int)

    sp = sub.add_parser("profile", help="check the standing wave and the surface tension")
    sp.add_argument("--half-width", type=float, default=20.0)
    sp.add_argument("--nodes", type=int, default=10000)
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("spectral", help="lowest eigenpairs of the layer operator")
    sp.add_argument("--eps", type=_csv_list, default=(0.5, 0.25, 0.125))
    sp.add_argument("--n", type=int, default=4001)
    sp.add_argument("--stencil", choices=("fourth", "second"), default="fourth")
    sp.set_defaults(func=cmd_spectral)

    sp = sub.add_parser("sharp", help="run the sharp-interface model")
    geometry(sp)
    sp.add_argument("--snapshots", type=int)
    sp.add_argument("--no-order1", dest="order1", action="store_false")
    sp.set_defaults(func=cmd_sharp)

    sp = sub.add_parser("construct", help="build the approximate solution at one time")
    geometry(sp)
    construction(sp)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--time", type=float, default=0.0)
    sp.add_argument("--profile", action="store_true", help="also write the field profiles")
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("diffuse", help="run the diffuse-interface model")
    geometry(sp)
    construction(sp)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--scheme", choices=SCHEMES)
    sp.add_argument("--init", choices=("construct", "theta"), default="construct")
    sp.set_defaults(func=cmd_diffuse)

    sp = sub.add_parser("converge", help="eps-ladder convergence study")
    geometry(sp)
    construction(sp)
    sp.add_argument("--ladder", type=_csv_list)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--scheme", choices=SCHEMES)
    sp.add_argument("--residuals", action="store_true", help="also fit the construction residual orders")
    sp.set_defaults(func=cmd_converge)
    return p


def error_line(exc):
    ctx = {k: (v if isinstance(v, (int, float, str, bool)) or v is None else repr(v))
           for k, v in getattr(exc, "context", {}).items()}
    return "error " + json.dumps({"code": getattr(exc, "code", "error"), "message": str(exc),
                                  "context": ctx}, sort_keys=True)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except SharpLimitError as exc:
        print(error_line(exc), file=sys.stderr)
        return 2 if isinstance(exc, InvalidArgumentError) else 1
    except (OSError, ValueError) as exc:
        print(error_line(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
