"""Matched-asymptotic approximate solution of orders 0 and 1 (radial geometry).

Pipeline, all on a target node grid r:

    sharp trajectory --solve_order1--> order-one outer fields and d1(t)
    build_outer    one-sided fields with smooth extensions across R
    build_inner    transition-layer fields in z = (r - R)/eps + d1
    build_boundary traces of the + side at r_out
    glue           cutoff blend, residuals and the mass / potential corrections

Extensions across the interface use the jump relations of the limit
problem: the extended + field on the inner side is the inner field plus a
polynomial in d = r - R whose coefficients are the jumps of the field and
its derivatives at R.  This makes the difference quotients p0 and q0 exact
polynomials, so the two-branch (quotient / gradient) definitions agree.
"""
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import interpolate

from .errors import ConsistencyError, DegenerateFitError, InvalidArgumentError
from .inner import inner_tables, solvability_integral
from .profile import SQRT2, cutoff, potential_derivative, surface_tension, theta
from .radial import apply_laplacian, cell_volumes, laplacian_bands, neumann_poisson, one_sided_slope, tridiag_solve
from .sharp import GT_FACTOR, SharpTrajectory

LN2_OVER_SQRT2 = np.log(2.0) / SQRT2


# ---------------------------------------------------------------- order one
@dataclass(frozen=True)
class Order1State:
    t: float
    d1: float
    mu1_in: np.ndarray      # sharp-grid nodes 0..m
    mu1_out: np.ndarray     # sharp-grid nodes m..n
    sigma1: np.ndarray
    slopes: tuple           # one-sided d(mu1)/dr at R from inside and outside

    @property
    def jump(self):
        return float(self.mu1_out[0] - self.mu1_in[-1])


def zero_order1(state):
    m = state.m
    return Order1State(state.t, 0.0, np.zeros(m + 1), np.zeros(state.r.size - m),
                       np.zeros_like(state.r), (0.0, 0.0))


def order1_interface_values(state, d1, dim, tables=None):
    """Values of mu1 at R from the inner and the outer side."""
    t = tables or inner_tables()
    S = surface_tension()
    R, V = state.R, state.V
    K = (dim - 1) / R
    common = 0.5 * t.curvature_coeff * K * K + V * (0.5 * t.log_moment + LN2_OVER_SQRT2)
    gt = GT_FACTOR * S * (dim - 1) / R ** 2
    s_in, s_out = state.slopes
    return d1 * (s_in - gt) + common, d1 * (s_out - gt) + common


def _side_rate(values, times, r_nodes, speeds, m):
    """d/dt at fixed r of a node-tracked field, separately on each side."""
    dvdt = np.gradient(values, times, axis=0)
    inner = np.gradient(values[:, : m + 1], axis=1) / np.gradient(r_nodes[:, : m + 1], axis=1)
    outer = np.gradient(values[:, m:], axis=1) / np.gradient(r_nodes[:, m:], axis=1)
    return (dvdt[:, : m + 1] - speeds[:, : m + 1] * inner,
            dvdt[:, m:] - speeds[:, m:] * outer)


def _solve_mu1_side(r, dim, rhs, bc, side, m):
    sub, diag, sup = laplacian_bands(r, dim)
    lo, d, up = -sub, 1.0 - diag, -sup
    if side < 0:
        sl = slice(0, m + 1)
        lo, d, up, b = lo[sl].copy(), d[sl].copy(), up[sl].copy(), rhs.copy()
        lo[-1], d[-1], b[-1] = 0.0, 1.0, bc
    else:
        sl = slice(m, None)
        lo, d, up, b = lo[sl].copy(), d[sl].copy(), up[sl].copy(), rhs.copy()
        up[0], d[0], b[0] = 0.0, 1.0, bc
    return tridiag_solve(lo, d, up, b)


def solve_order1(solver, traj, tables=None):
    """Order-one outer problem along a sharp trajectory stored at every step.

    Bulk equations for (mu1, sigma1) with u1 = mu0/8 on each side, the
    interface values of `order1_interface_values`, [sigma1] = 0,
    [d sigma1/dr] = 2 d1, and d1' = ([d mu1/dr] - d1 [d2 mu0/dr2]) / 2 with
    d1(0) = 0, sigma1(0) = 0.
    """
    states = traj.states
    if len(states) < 3:
        raise InvalidArgumentError("order-one solve needs at least three stored states")
    times = traj.times()
    dt = np.diff(times)
    if np.ptp(dt) > 1e-9 * dt.mean():
        raise InvalidArgumentError("order-one solve needs a trajectory stored at every step")
    dt = float(dt.mean())
    dim = solver.domain.dim
    grid = solver.grid
    m = grid.m
    mu0 = np.array([s.mu for s in states])
    nodes = np.array([s.r for s in states])
    speeds = np.array([grid.node_speed(s.V) for s in states])
    rate_in, rate_out = _side_rate(mu0, times, nodes, speeds, m)

    def mu1_solve(k, sigma1, d1):
        st = states[k]
        bc_in, bc_out = order1_interface_values(st, d1, dim, tables)
        u1 = st.mu / 8.0
        rhs_in = 2.0 * sigma1[: m + 1] + u1[: m + 1] - rate_in[k] / 8.0
        rhs_out = 2.0 * sigma1[m:] + u1[m:] - rate_out[k] / 8.0
        a = _solve_mu1_side(st.r, dim, rhs_in, bc_in, -1, m)
        b = _solve_mu1_side(st.r, dim, rhs_out, bc_out, +1, m)
        slopes = (one_sided_slope(a, st.r[: m + 1], m, -1), one_sided_slope(b, st.r[m:], 0, +1))
        return Order1State(st.t, d1, a, b, sigma1, slopes)

    out = [mu1_solve(0, np.zeros_like(states[0].r), 0.0)]
    for k in range(len(states) - 1):
        st, new = states[k], states[k + 1]
        cur = out[-1]
        K = (dim - 1) / st.R
        jump_rr = -2.0 + 2.0 * K * st.V
        d1 = cur.d1 + dt * 0.5 * ((cur.slopes[1] - cur.slopes[0]) - cur.d1 * jump_rr)
        # sigma1 source mu1 - mu0/8, volume-split at the interface node, plus the kink
        src = np.empty_like(st.r)
        src[:m] = cur.mu1_in[:m] - st.mu[:m] / 8.0
        src[m + 1:] = cur.mu1_out[1:] - st.mu[m + 1:] / 8.0
        f = 0.5 * (st.r[m - 1] + st.r[m]), 0.5 * (st.r[m] + st.r[m + 1])
        left = (st.r[m] ** dim - f[0] ** dim) / dim
        right = (f[1] ** dim - st.r[m] ** dim) / dim
        src[m] = (left * cur.mu1_in[-1] + right * cur.mu1_out[0]) / (left + right) - st.mu[m] / 8.0
        vol = cell_volumes(new.r, dim)
        kink = 2.0 * d1 * new.R ** (dim - 1) / vol[m]
        lo, d, up = solver.sigma_system(new.r, grid.node_speed(st.V), dt)
        rhs = cur.sigma1 + dt * src
        rhs[m] -= dt * kink
        sigma1 = tridiag_solve(lo, d, up, rhs)
        out.append(mu1_solve(k + 1, sigma1, d1))
    return out


@dataclass
class SharpHistory:
    """Sharp trajectory with its order-one companion; time interpolation is linear."""

    traj: SharpTrajectory
    order1: list
    dim: int

    @classmethod
    def compute(cls, solver, R0, T, dt, sigma0=None, order1=True, tables=None):
        traj = solver.run(R0, T, dt, sigma0)
        o1 = solve_order1(solver, traj, tables) if order1 else [zero_order1(s) for s in traj.states]
        return cls(traj, o1, solver.domain.dim)

    def at(self, t):
        ts = self.traj.times()
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise InvalidArgumentError("time outside the stored trajectory", t=t)
        k = int(np.clip(np.searchsorted(ts, t) - 1, 0, len(ts) - 2))
        w = (t - ts[k]) / (ts[k + 1] - ts[k])
        if abs(w) < 1e-12:
            return self.traj.states[k], self.order1[k]
        if abs(w - 1.0) < 1e-12:
            return self.traj.states[k + 1], self.order1[k + 1]
        a, b = self.order1[k], self.order1[k + 1]
        mix = lambda x, y: (1.0 - w) * x + w * y
        o1 = Order1State(t, mix(a.d1, b.d1), mix(a.mu1_in, b.mu1_in), mix(a.mu1_out, b.mu1_out),
                         mix(a.sigma1, b.sigma1), (mix(a.slopes[0], b.slopes[0]), mix(a.slopes[1], b.slopes[1])))
        return self.traj.at(t), o1


# ------------------------------------------------------------------ distance
@dataclass(frozen=True)
class DistanceExpansion:
    """d0 = r - R(t) and the time-only correction d1; the layer sits where d0 + eps d1 = 0."""

    R: float
    d1: float
    eps: float

    def d0(self, r):
        return np.asarray(r, dtype=float) - self.R

    def composite(self, r):
        return self.d0(r) + self.eps * self.d1

    def z(self, r):
        return self.composite(r) / self.eps


# ------------------------------------------------------------------- outer
class ExtendedField:
    """One-sided cubic splines plus a jump polynomial in d = r - R for the other side."""

    def __init__(self, r, m, inner_vals, outer_vals, jump_coeffs):
        self.R = float(r[m])
        self._in = interpolate.CubicSpline(r[: m + 1], inner_vals)
        self._out = interpolate.CubicSpline(r[m:], outer_vals)
        self.jump = np.polynomial.Polynomial(jump_coeffs)

    def plus(self, r, nu=0):
        r = np.asarray(r, dtype=float)
        d = r - self.R
        ext = self._in(r, nu) + self.jump.deriv(nu)(d)
        return np.where(d >= 0, self._out(r, nu), ext)

    def minus(self, r, nu=0):
        r = np.asarray(r, dtype=float)
        d = r - self.R
        ext = self._out(r, nu) - self.jump.deriv(nu)(d)
        return np.where(d < 0, self._in(r, nu), ext)

    def actual(self, r, nu=0):
        r = np.asarray(r, dtype=float)
        return np.where(r >= self.R, self.plus(r, nu), self.minus(r, nu))


def mu0_jump_coeffs(state, dim):
    """Taylor coefficients of mu0+ - mu0- in d, from the bulk equations on each side."""
    R = state.R
    a1 = state.slopes[1] - state.slopes[0]
    a2 = -2.0 - (dim - 1) / R * a1
    a3 = a1 * (1.0 + (dim - 1) / R ** 2) - (dim - 1) / R * a2
    return [0.0, a1, a2 / 2.0, a3 / 6.0]


@dataclass
class OuterFields:
    """Per-side outer fields of orders 0 and 1 on the target nodes, extended across R."""

    r: np.ndarray
    R: float
    V: float
    order: int
    u0p: np.ndarray
    u0m: np.ndarray
    mu0p: np.ndarray
    mu0m: np.ndarray
    sig0p: np.ndarray
    sig0m: np.ndarray
    u1p: np.ndarray
    u1m: np.ndarray
    mu1p: np.ndarray
    mu1m: np.ndarray
    sig1p: np.ndarray
    sig1m: np.ndarray
    d1: float
    mu_ext: ExtendedField = None
    sigma_ext: ExtendedField = None
    jumps: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def side_values(self, name):
        p, m = getattr(self, name + "p"), getattr(self, name + "m")
        return np.where(self.r >= self.R, p, m)


def build_outer(state, r, dim, order1=None, order=1):
    """Outer fields on nodes r from a sharp state and (for order 1) its order-one companion."""
    if order not in (0, 1):
        raise InvalidArgumentError("construction order must be 0 or 1", order=order)
    r = np.asarray(r, dtype=float)
    m = state.m
    warnings = []
    if order == 1 and order1 is None:
        warnings.append("order-one outer solve skipped: mu1, sigma1, d1 set to zero")
        order1 = zero_order1(state)
    mu = ExtendedField(state.r, m, state.mu[: m + 1], state.mu[m:], mu0_jump_coeffs(state, dim))
    sg = ExtendedField(state.r, m, state.sigma[: m + 1], state.sigma[m:], [0.0, 0.0, 1.0])
    ones = np.ones_like(r)
    mu0p, mu0m = mu.plus(r), mu.minus(r)
    zero = np.zeros_like(r)
    if order == 1:
        o1 = order1
        b0 = o1.jump
        b1 = o1.slopes[1] - o1.slopes[0]
        mu1 = ExtendedField(state.r, m, o1.mu1_in, o1.mu1_out, [b0, b1])
        sg1 = ExtendedField(state.r, m, o1.sigma1[: m + 1], o1.sigma1[m:], [0.0, 2.0 * o1.d1])
        mu1p, mu1m, sig1p, sig1m, d1 = mu1.plus(r), mu1.minus(r), sg1.plus(r), sg1.minus(r), o1.d1
        u1p, u1m = mu0p / 8.0, mu0m / 8.0
    else:
        mu1p = mu1m = sig1p = sig1m = u1p = u1m = zero
        d1 = 0.0
    jumps = {"mu0": float(mu.plus(state.R) - mu.minus(state.R)),
             "sigma0": float(sg.plus(state.R) - sg.minus(state.R)),
             "dmu0": float(state.slopes[1] - state.slopes[0]),
             "dsigma0": float(one_sided_slope(state.sigma, state.r, m, +1) - one_sided_slope(state.sigma, state.r, m, -1))}
    return OuterFields(r, state.R, state.V, order, ones, -ones, mu0p, mu0m, sg.plus(r), sg.minus(r),
                       u1p, u1m, mu1p, mu1m, sig1p, sig1m, d1, mu, sg, jumps, warnings)


# ------------------------------------------------------------------- inner
@dataclass
class InnerFields:
    """Transition-layer fields on the nodes of Gamma(delta); NaN elsewhere."""

    z: np.ndarray
    mask: np.ndarray
    u0: np.ndarray
    mu0: np.ndarray
    sigma0: np.ndarray
    u1: np.ndarray
    mu1: np.ndarray
    sigma1: np.ndarray
    p0: np.ndarray
    q0: np.ndarray
    g0: np.ndarray
    h0: np.ndarray
    l0: np.ndarray
    solvability: dict
    tables: object = None

    def theta03(self, zeta, i, outer, dist, dim):
        """Curvature-type forcing of the order-one profile equation at node i, as a function of z."""
        t = self.tables
        K = (dim - 1) / outer.r[i]
        eta = t.mollifier(zeta)
        mu = eta * outer.mu0p[i] + (1.0 - eta) * outer.mu0m[i]
        return theta(zeta, 1) * K + mu - t.mollifier(zeta, 1) * self.l0[i] * dist.d0(outer.r[i])


def _two_branch(numer, d, h, on_gamma):
    """numer/d for |d| >= h, the on-interface gradient value otherwise."""
    safe = np.where(np.abs(d) >= h, d, 1.0)
    return np.where(np.abs(d) >= h, numer / safe, on_gamma)


def build_inner(outer, dist, dim, h, delta, order=1, variant="bump", tol=1e-8, flux_tol=1e-2):
    """Inner fields of orders 0 and 1; asserts the solvability conditions."""
    t = inner_tables(variant)
    S = surface_tension()
    r = outer.r
    d = dist.d0(r)
    mask = np.abs(d) < delta
    z = np.where(mask, dist.z(r) if order == 1 else d / dist.eps, np.nan)
    # solvability of the order-zero equations gives the sharp interface conditions
    kappa = -(dim - 1) / outer.R if dim > 1 else 0.0
    mu_gamma = float(outer.mu_ext.plus(outer.R))
    checks = {"mu0_jump": abs(outer.jumps["mu0"]), "sigma0_jump": abs(outer.jumps["sigma0"]),
              "mu_flux_plus_2V": abs(outer.jumps["dmu0"] + 2.0 * outer.V),
              "sigma_flux_jump": abs(outer.jumps["dsigma0"]),
              "curvature": abs(solvability_integral(kappa, mu_gamma, variant))}
    for name, lim in (("mu0_jump", 1e-10), ("sigma0_jump", 1e-10), ("mu_flux_plus_2V", 1e-10),
                      ("curvature", tol), ("sigma_flux_jump", flux_tol)):
        if checks[name] > lim:
            raise ConsistencyError(f"solvability condition violated: {name}", condition=name, residual=checks[name])
    nan = np.full_like(r, np.nan)
    zi = z[mask]
    ri = r[mask]
    di = d[mask]
    K = (dim - 1) / ri
    eta = t.mollifier(zi)
    mu0p, mu0m = outer.mu0p[mask], outer.mu0m[mask]
    sg0p, sg0m = outer.sig0p[mask], outer.sig0m[mask]
    # difference-quotient coefficients
    jmu = mu0p - mu0m
    a = outer.mu_ext.jump.coef
    # near the interface: the gradient value on Gamma continued by the quotient polynomial
    pq = np.polynomial.Polynomial(a[1:])
    p0 = _two_branch(jmu, di, h, pq(di))
    q0 = _two_branch(sg0p - sg0m, di, h, di)
    switch = max(abs(pq(h) - outer.mu_ext.jump(h) / h), abs(pq(-h) + outer.mu_ext.jump(-h) / h))
    checks["quotient_switch"] = float(switch)
    if switch > 1e-8 * (1.0 + np.abs(a).max()):
        raise ConsistencyError("quotient and gradient branches disagree at the switch", condition="p0 continuity",
                               residual=float(switch))
    ng = jmu * K + 2.0 * outer.mu_ext.jump.deriv(1)(di) - p0 + 2.0 * outer.V
    g0 = _two_branch(ng, di, h, a[1] * (dim - 1) / outer.R + 1.5 * 2.0 * a[2])
    nh = (sg0p - sg0m) * (K + outer.V) + 2.0 * 2.0 * di - q0
    h0 = _two_branch(nh, di, h, 3.0)
    nl = S * K + t.c2 * mu0p + t.c3 * mu0m
    dl = -S * (dim - 1) / ri ** 2 + t.c2 * outer.mu_ext.plus(ri, 1) + t.c3 * outer.mu_ext.minus(ri, 1)
    l0 = _two_branch(nl / t.c4, di, h, dl / t.c4)
    u0 = theta(zi)
    mu0 = eta * mu0p + (1.0 - eta) * mu0m
    sg0 = eta * sg0p + (1.0 - eta) * sg0m
    if order == 1:
        u1 = t("theta_shift", zi) + K * t("curv", zi) + mu0p * t("plus", zi) + mu0m * t("minus", zi)
        mu1 = (eta * outer.mu1p[mask] + (1.0 - eta) * outer.mu1m[mask]
               + p0 * t("jump", zi) + outer.V * t("speed", zi))
        sg1 = eta * outer.sig1p[mask] + (1.0 - eta) * outer.sig1m[mask] + q0 * t("jump", zi)
    else:
        u1 = mu1 = sg1 = np.zeros_like(zi)

    def put(vals):
        out = nan.copy()
        out[mask] = vals
        return out

    return InnerFields(z, mask, put(u0), put(mu0), put(sg0), put(u1), put(mu1), put(sg1),
                       put(p0), put(q0), put(g0), put(h0), put(l0), checks, t)


# ---------------------------------------------------------------- boundary
@dataclass(frozen=True)
class BoundaryLayerFields:
    """Boundary-layer fields: the + side traces at r_out, constant in the stretched variable."""

    r_out: float
    u: tuple
    mu: tuple
    sigma: tuple
    compatibility: float

    def profile(self, name, zb, order=0):
        return np.full_like(np.asarray(zb, dtype=float), getattr(self, name)[order])


def build_boundary(outer, state, tol=1e-6):
    r_end = float(state.r[-1])
    m0 = float(outer.mu_ext.plus(r_end))
    s0 = float(outer.sigma_ext.plus(r_end))
    m1 = float(outer.mu1p[-1]) if outer.order == 1 else 0.0
    s1 = float(outer.sig1p[-1]) if outer.order == 1 else 0.0
    # normal derivatives from the one-sided splines at the wall
    res = max(abs(float(outer.mu_ext.plus(r_end, 1))), abs(float(outer.sigma_ext.plus(r_end, 1))))
    if res > tol:
        raise ConsistencyError("Neumann compatibility of the outer fields fails at the wall",
                               condition="zero normal derivative", residual=res)
    return BoundaryLayerFields(r_end, (1.0, m0 / 8.0), (m0, m1), (s0, s1), res)


# -------------------------------------------------------------------- glue
@dataclass
class ApproxSolution:
    t: float
    eps: float
    delta: float
    order: int
    r: np.ndarray
    dim: int
    zeta: np.ndarray
    u_bar: np.ndarray
    mu_bar: np.ndarray
    sigma_bar: np.ndarray
    u: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    phi: np.ndarray
    omega: dict
    mu_tilde: np.ndarray
    dist: DistanceExpansion
    layer: np.ndarray        # theta(d0/eps + d1) on the nodes

    def norms(self):
        vol = cell_volumes(self.r, self.dim)
        out = {}
        for k, w in self.omega.items():
            out[f"{k}_sup"] = float(np.max(np.abs(w)))
            out[f"{k}_l2"] = float(np.sqrt(np.sum(vol * w * w)))
        return out


def default_delta(R, r_out, r_in=0.0, dim=2):
    gap = r_out - R
    if dim == 1:
        gap = min(gap, R - r_in)
    return min(0.2, 0.4 * gap)


def composite_fields(outer, inner, eps, delta, dist, order=1, variant="bump"):
    """Cutoff blend of inner and outer composites; returns (u, mu, sigma, zeta)."""
    d = dist.d0(outer.r)
    zeta = cutoff(d / delta, variant)
    uo = outer.side_values("u0")
    mo = outer.side_values("mu0")
    so = outer.side_values("sig0")
    ui, mi, si = inner.u0, inner.mu0, inner.sigma0
    if order == 1:
        uo = uo + eps * outer.side_values("u1")
        mo = mo + eps * outer.side_values("mu1")
        so = so + eps * outer.side_values("sig1")
        ui = ui + eps * inner.u1
        mi = mi + eps * inner.mu1
        si = si + eps * inner.sigma1
    blend = lambda a, b: np.where(inner.mask, zeta * np.nan_to_num(a) + (1.0 - zeta) * b, b)
    return blend(ui, uo), blend(mi, mo), blend(si, so), zeta


def glue(outer, inner, boundary, dist, delta, eps, dim, order=1, rates=None, mass_shift=0.0,
         variant="bump", r_in=0.0):
    """Glued approximate solution at one time.

    `rates` = (du_bar/dt, dsigma_bar/dt) on the nodes; without them the
    first two residuals (and hence the potential correction) are zero.
    `mass_shift` is the change of the total of u_bar + sigma_bar since t = 0.
    """
    r = outer.r
    gap = boundary.r_out - outer.R
    if dim == 1:
        gap = min(gap, outer.R - r_in)
    if not 0.0 < delta < 0.5 * gap:
        raise InvalidArgumentError("gluing half-width must be below half the wall distance", delta=delta, gap=gap)
    u, mu, sg, zeta = composite_fields(outer, inner, eps, delta, dist, order, variant)
    lap = lambda x: apply_laplacian(x, r, dim)
    vol = cell_volumes(r, dim)
    react = 2.0 * sg + u - mu
    if rates is None:
        w1 = np.zeros_like(r)
        w2 = np.zeros_like(r)
    else:
        w1 = rates[0] - lap(mu) - react
        w2 = rates[1] - lap(sg) + react
    w3 = mu - (-eps * lap(u) + potential_derivative(u, 1) / eps)
    psi, _ = neumann_poisson(w1 + w2, r, dim)
    mu_t = -psi                      # lap(mu_t) = w1 + w2 - mean, zero mean
    phi = u + sg - mass_shift / np.sum(vol)
    uA = u - w2 - mu_t
    muA = mu - mu_t
    w4 = muA - (-eps * lap(uA) + potential_derivative(uA, 1) / eps)
    layer = theta(dist.z(r))
    return ApproxSolution(outer_time(outer), eps, delta, order, r, dim, zeta, u, mu, sg, uA, muA, sg.copy(), phi,
                          {"omega1": w1, "omega2": w2, "omega3": w3, "omega4": w4}, mu_t, dist, layer)


def outer_time(outer):
    return getattr(outer, "t", np.nan)


class ApproxBuilder:
    """Builds the approximate solution at any stored time on a fixed node grid."""

    def __init__(self, history, r, eps, order=1, delta=None, variant="bump", r_out=None, r_in=0.0):
        if not eps > 0:
            raise InvalidArgumentError("eps must be positive", eps=eps)
        self.history = history
        self.r = np.asarray(r, dtype=float)
        self.dim = history.dim
        self.eps = eps
        self.order = order
        self.variant = variant
        self.r_in = r_in
        R0 = history.traj.states[0].R
        self.r_out = float(self.r[-1]) if r_out is None else r_out
        self.delta = default_delta(R0, self.r_out, r_in, self.dim) if delta is None else delta
        self.h = float(np.max(np.diff(self.r)))
        self._mass0 = None

    def pieces(self, t):
        state, o1 = self.history.at(t)
        outer = build_outer(state, self.r, self.dim, o1 if self.order == 1 else None, self.order)
        outer.t = t
        if self.order == 0:
            outer.warnings.clear()
        d1 = outer.d1 if self.order == 1 else 0.0
        dist = DistanceExpansion(state.R, d1, self.eps)
        inner = build_inner(outer, dist, self.dim, self.h, self.delta, self.order, self.variant)
        boundary = build_boundary(outer, state, tol=np.inf)
        return outer, inner, boundary, dist

    def composite(self, t):
        outer, inner, boundary, dist = self.pieces(t)
        u, mu, sg, _ = composite_fields(outer, inner, self.eps, self.delta, dist, self.order, self.variant)
        return u, mu, sg

    def total(self, t):
        u, _, sg = self.composite(t)
        return float(np.sum(cell_volumes(self.r, self.dim) * (u + sg)))

    def rates(self, t):
        ts = self.history.traj.times()
        tau = self.history.traj.dt
        if t - tau < ts[0] - 1e-12:
            a, b, c = (self.composite(t + k * tau) for k in range(3))
            return tuple((-3.0 * x + 4.0 * y - w) / (2.0 * tau) for x, y, w in zip(a, b, c))[::2]
        if t + tau > ts[-1] + 1e-12:
            a, b, c = (self.composite(t - k * tau) for k in range(3))
            return tuple((3.0 * x - 4.0 * y + w) / (2.0 * tau) for x, y, w in zip(a, b, c))[::2]
        a = self.composite(t - tau)
        c = self.composite(t + tau)
        return tuple((y - x) / (2.0 * tau) for x, y in zip(a, c))[::2]

    def build(self, t, residuals=True):
        outer, inner, boundary, dist = self.pieces(t)
        if self._mass0 is None:
            self._mass0 = self.total(self.history.traj.times()[0])
        # int (omega1 + omega2) = d/dt int phi_bar exactly for the finite-volume Laplacian,
        # so the time integral of the residual mass is the change of the total
        shift = self.total(t) - self._mass0
        rates = self.rates(t) if residuals else None
        return glue(outer, inner, boundary, dist, self.delta, self.eps, self.dim, self.order,
                    rates, shift, self.variant, self.r_in)


def fit_order(eps, values):
    """Least-squares slope of log(values) against log(eps)."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if eps.size < 3:
        raise InvalidArgumentError("need at least three ladder points", n=int(eps.size))
    if np.unique(eps).size != eps.size:
        raise DegenerateFitError("ladder has repeated eps values")
    if np.any(values <= 0):
        raise InvalidArgumentError("values must be positive for a log fit")
    slope, intercept = np.polyfit(np.log(eps), np.log(values), 1)
    return float(slope), float(intercept)


def residual_orders(approxes, norm="sup"):
    """Fitted decay orders of the residual norms over a ladder of ApproxSolution objects."""
    eps = [a.eps for a in approxes]
    if len(set(a.order for a in approxes)) != 1:
        raise InvalidArgumentError("all ladder points must use the same construction order")
    names = ["omega1", "omega2", "omega3", "omega4"]
    out = {}
    for k in names:
        vals = [a.norms()[f"{k}_{norm}"] for a in approxes]
        if min(vals) <= 0:
            out[k] = np.nan
            continue
        out[k] = fit_order(eps, vals)[0]
    return out
