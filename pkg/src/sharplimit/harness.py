"""Convergence studies: run configuration, error norms, rate fits and reports."""
import configparser
import csv
import io
import json
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .asymptotic import ApproxBuilder, SharpHistory, build_outer, default_delta
from .diffuse import DiffuseSolver, DiffuseState, SchemeParams
from .errors import DegenerateFitError, InvalidArgumentError, NumericalFailureError, OutputError
from .radial import (RadialDomain, cell_volumes, dirichlet_poisson, gradient_energy,
                     neumann_poisson)
from .sharp import SharpSolver

OBSERVABLES = ("u_outer", "u_outer_composite", "u_layer", "sigma", "mu", "interface", "neg_norm_phi")


# ------------------------------------------------------------------ config
@dataclass(frozen=True)
class RunConfig:
    dim: int = 2
    R0: float = 0.5
    r_out: float = 1.0
    ladder: tuple = (0.1, 0.05, 0.025)
    order: int = 1
    delta: float = None
    T: float = 0.05
    dt: float = 1e-4               # diffuse step
    sharp_dt: float = 1e-4
    sharp_n: int = 400
    points_per_eps: int = 32       # grid policy: h = eps / points_per_eps
    snapshots: int = 20            # intervals of the uniform sampling of [0, T]
    scheme: str = "bdf2"
    variant: str = "bump"
    out: str = "out"
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        lad = tuple(float(e) for e in self.ladder)
        object.__setattr__(self, "ladder", lad)
        if any(e <= 0 for e in lad):
            raise InvalidArgumentError("ladder entries must be positive", ladder=lad)
        if any(b >= a for a, b in zip(lad, lad[1:])):
            raise InvalidArgumentError("ladder must be strictly decreasing", ladder=lad)
        if self.order not in (0, 1):
            raise InvalidArgumentError("construction order must be 0 or 1", order=self.order)
        if self.dim not in (1, 2, 3):
            raise InvalidArgumentError("dimension must be 1, 2 or 3", dim=self.dim)
        if not 0 < self.R0 < self.r_out:
            raise InvalidArgumentError("need 0 < R0 < r_out", R0=self.R0, r_out=self.r_out)
        gap = self.r_out - self.R0 if self.dim > 1 else min(self.r_out - self.R0, self.R0)
        if not 0 < self.delta_value < 0.5 * gap:
            raise InvalidArgumentError("delta must be below half the wall distance", delta=self.delta_value, gap=gap)
        for name in ("T", "dt", "sharp_dt"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive", **{name: getattr(self, name)})
        if self.snapshots < 1 or self.workers < 1:
            raise InvalidArgumentError("snapshots and workers must be at least 1")

    @property
    def delta_value(self):
        if self.delta is not None:
            return float(self.delta)
        return default_delta(self.R0, self.r_out, 0.0, self.dim)

    def snapshot_times(self):
        return np.linspace(0.0, self.T, self.snapshots + 1)

    def to_dict(self):
        d = asdict(self)
        d["ladder"] = list(self.ladder)
        d["delta"] = self.delta_value
        return d

    @classmethod
    def from_mapping(cls, mapping, base=None):
        """Build from string or typed values; unknown keys are rejected."""
        base = base or cls()
        kinds = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, val in mapping.items():
            key = key.replace("-", "_")
            if key not in kinds:
                raise InvalidArgumentError(f"unknown configuration key {key!r}")
            if val is None:
                continue
            current = getattr(base, key)
            if key == "ladder":
                kw[key] = tuple(float(x) for x in (val.split(",") if isinstance(val, str) else val))
            elif key == "delta":
                kw[key] = None if str(val).lower() in ("", "none", "auto") else float(val)
            elif isinstance(current, bool):
                kw[key] = str(val).lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                kw[key] = int(val)
            elif isinstance(current, float):
                kw[key] = float(val)
            else:
                kw[key] = str(val)
        return replace(base, **kw)

    @classmethod
    def from_file(cls, path):
        """Read `key = value` lines (an optional [run] header is allowed)."""
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidArgumentError(f"cannot read config {path}: {exc.strerror}", path=path) from exc
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.optionxform = str      # keys such as T and R0 are case sensitive
        if not text.lstrip().startswith("["):
            text = "[run]\n" + text
        parser.read_string(text)
        items = {}
        for sec in parser.sections():
            items.update(parser.items(sec))
        return cls.from_mapping(items)


# ------------------------------------------------------------------ pieces
def impose_initial(approx):
    """Initial data for the diffuse run: sigma from the approximation, u from phi - sigma."""
    if abs(approx.t) > 1e-14:
        raise InvalidArgumentError("initial data needs the approximation at t = 0", t=approx.t)
    sigma0 = approx.sigma.copy()
    u0 = approx.phi - sigma0
    return u0, sigma0


@dataclass(frozen=True)
class NegativeNorm:
    value: float
    removed_mean: float


def negative_norm(values, r, dim, boundary="neumann-meanzero"):
    """||grad psi|| with -lap(psi) = values; the input array is never modified."""
    values = np.array(values, dtype=float)
    if boundary == "neumann-meanzero":
        psi, mean = neumann_poisson(values, r, dim)
    elif boundary == "dirichlet":
        psi, mean = dirichlet_poisson(values, r, dim, both_ends=(dim == 1)), 0.0
    else:
        raise InvalidArgumentError(f"unknown boundary kind {boundary!r}")
    if not np.all(np.isfinite(psi)):
        raise NumericalFailureError("Poisson solve returned non-finite values")
    return NegativeNorm(gradient_energy(psi, r, dim), float(mean))


def fit_rate(points):
    """Least-squares fit of log e against log eps: (slope, intercept, rms residual)."""
    pts = [(float(e), float(v)) for e, v in points]
    if len(pts) < 3:
        raise InvalidArgumentError("need at least three points for a rate fit", n=len(pts))
    eps = np.array([p[0] for p in pts])
    err = np.array([p[1] for p in pts])
    if np.any(eps <= 0) or np.any(~(err > 0)):
        raise InvalidArgumentError("rate fit needs positive eps and errors")
    if np.unique(eps).size < eps.size:
        raise DegenerateFitError("repeated eps values make the fit degenerate")
    x, y = np.log(eps), np.log(err)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res ** 2)))


def region_labels(r, R, delta):
    """-1 on the inner bulk, +1 on the outer bulk, 0 on the layer |r - R| < delta."""
    d = np.asarray(r) - R
    lab = np.where(d >= 0, 1, -1)
    lab[np.abs(d) < delta] = 0
    return lab


@dataclass
class FieldSnapshot:
    """What `compare` needs from one time level of either side."""

    t: float
    u: np.ndarray
    layer: np.ndarray       # reference profile for the layer check
    sigma: np.ndarray
    mu: np.ndarray
    phi: np.ndarray
    R: float

    @classmethod
    def from_diffuse(cls, state, solver):
        mu = solver.chemical_potential(state.u, state.eps)
        return cls(state.t, state.u, state.u, state.sigma, mu, state.u + state.sigma,
                   solver.interface_position(state.u))

    @classmethod
    def from_approx(cls, approx, history):
        st, _ = history.at(approx.t)
        ref = build_outer(st, approx.r, approx.dim, None, 0)
        return cls(approx.t, approx.u, approx.layer, ref.side_values("sig0"), ref.side_values("mu0"),
                   approx.phi, st.R)


def compare(a, b, history, r, dim, delta):
    """Sup-in-time errors between two snapshot sequences (sharp front sets the regions)."""
    if len(a) != len(b):
        raise InvalidArgumentError("snapshot sequences differ in length", a=len(a), b=len(b))
    out = {k: 0.0 for k in OBSERVABLES if k != "u_outer_composite"}
    out.update({"u_outer_plus": 0.0, "u_outer_minus": 0.0, "neg_norm_mean": 0.0})
    for x, y in zip(a, b):
        if abs(x.t - y.t) > 1e-9:
            raise InvalidArgumentError("snapshot times do not match", ta=x.t, tb=y.t)
        if x.u.shape != y.u.shape:
            raise InvalidArgumentError("snapshot grids do not match")
        st, _ = history.at(x.t)
        lab = region_labels(r, st.R, delta)
        du = np.abs(x.u - y.u)
        for name, sel in (("u_outer", lab != 0), ("u_outer_plus", lab > 0), ("u_outer_minus", lab < 0)):
            if np.any(sel):
                out[name] = max(out[name], float(du[sel].max()))
        lay = lab == 0
        if np.any(lay):
            # the first sequence against the reference profile carried by the second
            out["u_layer"] = max(out["u_layer"], float(np.abs(x.u - y.layer)[lay].max()))
        out["sigma"] = max(out["sigma"], float(np.abs(x.sigma - y.sigma).max()))
        out["mu"] = max(out["mu"], float(np.abs(x.mu - y.mu).max()))
        out["interface"] = max(out["interface"], abs(x.R - y.R))
        nn = negative_norm(x.phi - y.phi, r, dim)
        out["neg_norm_phi"] = max(out["neg_norm_phi"], nn.value)
        out["neg_norm_mean"] = max(out["neg_norm_mean"], abs(nn.removed_mean))
    return out


# ------------------------------------------------------------------ runs
def sharp_history(config):
    dom = RadialDomain(config.dim, config.r_out, config.sharp_n)
    solver = SharpSolver(dom, config.R0)
    return SharpHistory.compute(solver, config.R0, config.T, config.sharp_dt, order1=config.order == 1)


def diffuse_domain(config, eps):
    if not eps > 0:
        raise InvalidArgumentError("eps must be positive", eps=eps)
    n = int(np.ceil(config.points_per_eps * config.r_out / eps))
    return RadialDomain(config.dim, config.r_out, n)


def run_point(config, eps, history):
    """One ladder point: construct, run the diffuse model, compare, and measure residuals."""
    dom = diffuse_domain(config, eps)
    solver = DiffuseSolver(dom)
    builder = ApproxBuilder(history, solver.r, eps, config.order, config.delta_value, config.variant)
    times = config.snapshot_times()
    approx = [builder.build(t) for t in times]
    u0, s0 = impose_initial(approx[0])
    params = SchemeParams(config.dt, eps, config.scheme)
    traj = solver.run(DiffuseState(0.0, u0, s0, eps), params, config.T, times)
    diff = [FieldSnapshot.from_diffuse(s, solver) for s in traj.states]
    ref = [FieldSnapshot.from_approx(a, history) for a in approx]
    row = compare(diff, ref, history, solver.r, dom.dim, config.delta_value)
    comp = [replace(x, u=a.u_bar) for x, a in zip(ref, approx)]
    row["u_outer_composite"] = compare(diff, comp, history, solver.r, dom.dim, config.delta_value)["u_outer"]
    row["mass_drift"] = traj.max_mass_drift
    for a in approx:
        for k, v in a.norms().items():
            row[k] = max(row.get(k, 0.0), v)
    row["eps"] = eps
    row["nodes"] = dom.n + 1
    return row


def _point_job(args):
    config, eps, history = args
    return run_point(config, eps, history)


@dataclass
class ErrorReport:
    rows: list = field(default_factory=list)
    rates: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def series(self, name):
        return [(r["eps"], r[name]) for r in self.rows]


def rates_for(rows, names):
    rates = {}
    if len(rows) < 3:
        return rates
    for name in names:
        pts = [(r["eps"], r[name]) for r in rows]
        if all(v > 0 for _, v in pts):
            rates[name] = fit_rate(pts)
    return rates


def run_ladder(config, history=None):
    history = history or sharp_history(config)
    jobs = [(config, e, history) for e in config.ladder]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_point_job, jobs))
    else:
        rows = [_point_job(j) for j in jobs]
    rows.sort(key=lambda r: -r["eps"])
    names = list(OBSERVABLES) + ["omega1_l2", "omega2_l2", "omega3_l2", "omega1_sup", "omega2_sup", "omega3_sup"]
    report = ErrorReport(rows, rates_for(rows, names))
    report.meta["d1_final"] = float(history.order1[-1].d1)
    report.meta["R_final"] = float(history.traj.states[-1].R)
    return report


def residual_ladder(config, history, order=None):
    """Residual norms (sup over snapshots) of the construction alone, per eps."""
    order = config.order if order is None else order
    rows = []
    for eps in config.ladder:
        r = diffuse_domain(config, eps).uniform_nodes()
        b = ApproxBuilder(history, r, eps, order, config.delta_value, config.variant)
        row = {"eps": eps}
        for t in config.snapshot_times():
            for k, v in b.build(t).norms().items():
                row[k] = max(row.get(k, 0.0), v)
        rows.append(row)
    names = [f"omega{i}_{n}" for i in range(1, 5) for n in ("l2", "sup")]
    return ErrorReport(rows, rates_for(rows, names), {"order": order})


# ------------------------------------------------------------------ output
def fmt(x):
    return f"{float(x):.16e}"


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["observable", "eps", "value"])
    names = sorted({k for row in report.rows for k in row if k not in ("eps", "nodes")})
    for name in names:
        for row in sorted(report.rows, key=lambda r: -r["eps"]):
            if name in row:
                w.writerow([name, fmt(row["eps"]), fmt(row[name])])
    return buf.getvalue()


def rates_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["observable", "slope", "intercept", "residual"])
    for name in sorted(report.rates):
        w.writerow([name] + [fmt(v) for v in report.rates[name]])
    return buf.getvalue()


def loglog_svg(points, fit=None, title="", width=360, height=280):
    """Small self-contained log-log plot of error against eps."""
    eps = np.log10([p[0] for p in points])
    err = np.log10([p[1] for p in points])
    pad = 40
    x0, x1 = eps.min() - 0.1, eps.max() + 0.1
    y0, y1 = err.min() - 0.2, err.max() + 0.2
    sx = lambda x: pad + (x - x0) / (x1 - x0) * (width - 2 * pad)
    sy = lambda y: height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
             f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
             'fill="none" stroke="black"/>',
             f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="12">{title}</text>',
             f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="11">log10 eps</text>',
             f'<text x="12" y="{height / 2:.1f}" font-size="11" transform="rotate(-90 12 {height / 2:.1f})" '
             'text-anchor="middle">log10 error</text>']
    if fit is not None:
        slope, icpt = fit[0], fit[1]
        xs = np.array([x0, x1])
        ys = (slope * xs * np.log(10) + icpt) / np.log(10)
        parts.append(f'<line x1="{sx(xs[0]):.2f}" y1="{sy(ys[0]):.2f}" x2="{sx(xs[1]):.2f}" '
                     f'y2="{sy(ys[1]):.2f}" stroke="gray" stroke-dasharray="4 3"/>')
        parts.append(f'<text x="{width - pad - 4}" y="{pad + 14}" text-anchor="end" font-size="11">'
                     f'slope {slope:.3f}</text>')
    for x, y in zip(eps, err):
        parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3.5" fill="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit(report, config, outdir=None):
    """Write errors.csv, rates.csv, one SVG per fitted observable and manifest.json."""
    outdir = outdir or config.out
    written = []
    try:
        os.makedirs(outdir, exist_ok=True)
        path = os.path.join(outdir, "errors.csv")
        with open(path, "w") as fh:
            fh.write(report_csv(report))
        written.append(path)
        path = os.path.join(outdir, "rates.csv")
        with open(path, "w") as fh:
            fh.write(rates_csv(report))
        written.append(path)
        if report.rows:
            for name in sorted(report.rates):
                pts = report.series(name)
                path = os.path.join(outdir, f"{name}.svg")
                with open(path, "w") as fh:
                    fh.write(loglog_svg(pts, report.rates[name], name))
                written.append(path)
        manifest = {"package": "sharplimit", "version": __version__, "python": platform.python_version(),
                    "numpy": np.__version__, "config": config.to_dict(),
                    "meta": {k: float(v) if isinstance(v, (float, np.floating)) else v
                             for k, v in report.meta.items()}}
        path = os.path.join(outdir, "manifest.json")
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    except OSError as exc:
        raise OutputError(f"cannot write output: {exc.strerror}", path=exc.filename or outdir) from exc
    return written
