"""Front-tracking solver for the sharp-interface limit in 1D and radial geometry.

Unknowns live on a node grid with one node pinned at the interface R(t):
m uniform intervals on the inner side and n - m on the outer side.  The
counts stay fixed, so when R moves every node moves with it and the
sigma equation is stepped in arbitrary Lagrangian-Eulerian form (the node
velocity appears as an advection term).  mu is quasi-static and is
re-solved from scratch on the new grid.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GeometryError, InvalidArgumentError, SimulationHaltError
from .profile import surface_tension
from .radial import (RadialDomain, cell_faces, central_slope, laplacian_bands,
                     one_sided_slope, tridiag_solve)

# mu on the interface is gt_factor * kappa * S; the inner expansion of the
# diffuse model gives 1/2 (see the decisions ledger)
GT_FACTOR = 0.5


@dataclass(frozen=True)
class FrontGrid:
    domain: RadialDomain
    m: int                      # index of the interface node

    def __post_init__(self):
        if not 2 < self.m < self.domain.n - 2:
            raise InvalidArgumentError("interface index leaves too few nodes on one side", m=self.m)

    @classmethod
    def for_radius(cls, domain, R):
        m = int(round(domain.n * (R - domain.r_in) / domain.length))
        return cls(domain, min(max(m, 3), domain.n - 3))

    def nodes(self, R):
        d = self.domain
        inner = d.r_in + (R - d.r_in) * np.linspace(0.0, 1.0, self.m + 1)
        outer = R + (d.r_out - R) * np.linspace(0.0, 1.0, d.n - self.m + 1)
        return np.concatenate([inner, outer[1:]])

    def node_speed(self, V):
        """dr_i/dt when R moves with speed V and the end nodes stay put."""
        d = self.domain
        inner = np.linspace(0.0, 1.0, self.m + 1)
        outer = 1.0 - np.linspace(0.0, 1.0, d.n - self.m + 1)
        return V * np.concatenate([inner, outer[1:]])

    def side(self):
        """-1 on inner nodes, +1 on outer nodes, 0 on the interface node."""
        s = np.ones(self.domain.n + 1)
        s[: self.m] = -1.0
        s[self.m] = 0.0
        return s

    def check_guard(self, R):
        d = self.domain
        guard = 2.0 * d.h
        if not (d.r_in + guard < R < d.r_out - guard):
            raise GeometryError("interface inside the boundary guard band", R=R, guard=guard)


@dataclass(frozen=True)
class SharpState:
    t: float
    R: float
    r: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    V: float
    kappa: float
    m: int
    slopes: tuple = (np.nan, np.nan)     # one-sided d(mu)/dr at R from inside and outside

    @property
    def inner(self):
        return slice(0, self.m + 1)

    @property
    def outer(self):
        return slice(self.m, None)


@dataclass
class SharpTrajectory:
    states: list = field(default_factory=list)
    dt: float = np.nan
    interface_value: object = None     # mu on the front as a function of R

    def times(self):
        return np.array([s.t for s in self.states])

    def radii(self):
        return np.array([s.R for s in self.states])

    def velocities(self):
        return np.array([s.V for s in self.states])

    def at(self, t):
        """State at time t, linear in time between snapshots (node-index wise)."""
        ts = self.times()
        if t <= ts[0]:
            return self.states[0]
        if t >= ts[-1]:
            return self.states[-1]
        k = int(np.searchsorted(ts, t) - 1)
        a, b = self.states[k], self.states[k + 1]
        w = (t - a.t) / (b.t - a.t)
        mix = lambda x, y: (1.0 - w) * x + w * y
        R = mix(a.R, b.R)
        mu = mix(a.mu, b.mu)
        if self.interface_value is not None:
            # the interface datum is nonlinear in R; keep it exact on the front
            mu[a.m] = self.interface_value(R)
        return SharpState(t, R, mix(a.r, b.r), mu, mix(a.sigma, b.sigma),
                          mix(a.V, b.V), mix(a.kappa, b.kappa), a.m,
                          (mix(a.slopes[0], b.slopes[0]), mix(a.slopes[1], b.slopes[1])))


class SharpSolver:
    """Solver bound to a domain; `gt_factor` scales the curvature datum kappa * S."""

    def __init__(self, domain, R0, gt_factor=GT_FACTOR):
        self.domain = domain
        self.grid = FrontGrid.for_radius(domain, R0)
        self.gt_factor = gt_factor
        self.S = surface_tension()

    # elliptic part
    def interface_value(self, R):
        return self.gt_factor * self.domain.curvature(R) * self.S

    def solve_mu(self, R, sigma, interface_value=None):
        """Two-sided solve of -lap(mu) + mu = 2 sigma -/+ 1 with mu(R) prescribed.

        Returns (nodes, mu, V, (slope_inside, slope_outside)).
        """
        g = self.grid
        g.check_guard(R)
        sigma = np.asarray(sigma, dtype=float)
        if not np.all(np.isfinite(sigma)):
            raise InvalidArgumentError("sigma has non-finite values")
        r = g.nodes(R)
        sub, diag, sup = laplacian_bands(r, self.domain.dim)
        lo, d, up = -sub, 1.0 - diag, -sup
        rhs = 2.0 * sigma + g.side()
        m = g.m
        # Dirichlet row at the interface; the two sides decouple through it
        lo, d, up = lo.copy(), d.copy(), up.copy()
        lo[m], d[m], up[m] = 0.0, 1.0, 0.0
        rhs[m] = self.interface_value(R) if interface_value is None else interface_value
        mu = tridiag_solve(lo, d, up, rhs)
        s_in = one_sided_slope(mu, r, m, -1)
        s_out = one_sided_slope(mu, r, m, +1)
        V = -0.5 * (s_out - s_in)
        return r, mu, V, (s_in, s_out)

    # parabolic part
    def sigma_system(self, r, node_speed, dt):
        """Rows of (1/dt + 2) sigma - w d(sigma)/dr - lap(sigma) on the moving grid."""
        sub, diag, sup = laplacian_bands(r, self.domain.dim)
        lo, d, up = -sub * dt, 1.0 + 2.0 * dt - diag * dt, -sup * dt
        # three-point advection in ALE form (the end nodes never move)
        hm = np.empty_like(r)
        hp = np.empty_like(r)
        hm[1:] = np.diff(r)
        hp[:-1] = np.diff(r)
        w = node_speed * dt
        inner = slice(1, -1)
        a = hm[inner]
        b = hp[inner]
        lo[inner] += w[inner] * b / (a * (a + b))
        d[inner] -= w[inner] * (b - a) / (a * b)
        up[inner] -= w[inner] * a / (b * (a + b))
        return lo, d, up

    def sigma_source(self, r, mu, source=None):
        """Cell-averaged mu -/+ 1, split exactly at the interface node."""
        if source is not None:
            return np.broadcast_to(np.asarray(source, dtype=float), r.shape).copy()
        g = self.grid
        s = mu - g.side()
        m = g.m
        f = cell_faces(r)
        dim = self.domain.dim
        left = (r[m] ** dim - f[m] ** dim) / dim
        right = (f[m + 1] ** dim - r[m] ** dim) / dim
        s[m] = mu[m] + (left - right) / (left + right)
        return s

    def step_sigma(self, state, dt, source=None, node_speed=None, new_nodes=None):
        """One backward-Euler step of d(sigma)/dt - lap(sigma) + 2 sigma = mu -/+ 1."""
        if dt < 0:
            raise InvalidArgumentError("dt must be non-negative", dt=dt)
        if dt == 0:
            return state.sigma.copy()
        r = state.r if new_nodes is None else new_nodes
        w = np.zeros_like(r) if node_speed is None else node_speed
        lo, d, up = self.sigma_system(r, w, dt)
        rhs = state.sigma + dt * self.sigma_source(state.r, state.mu, source)
        return tridiag_solve(lo, d, up, rhs)

    # driver
    def initial_state(self, R0, sigma0=None, t0=0.0):
        r = self.grid.nodes(R0)
        sigma = np.zeros_like(r) if sigma0 is None else np.asarray(sigma0(r) if callable(sigma0) else sigma0, dtype=float)
        r, mu, V, slopes = self.solve_mu(R0, sigma)
        return SharpState(t0, R0, r, mu, sigma, V, self.domain.curvature(R0), self.grid.m, slopes)

    def advance(self, state, dt, velocity=None):
        """Move the front with the current V (or an injected one), step sigma, re-solve mu."""
        V = state.V if velocity is None else velocity
        R_new = state.R + V * dt
        try:
            self.grid.check_guard(R_new)
        except GeometryError as exc:
            raise SimulationHaltError(str(exc), state=state, R=R_new) from exc
        r_new = self.grid.nodes(R_new)
        sigma = self.step_sigma(state, dt, node_speed=self.grid.node_speed(V), new_nodes=r_new)
        r_new, mu, V_new, slopes = self.solve_mu(R_new, sigma)
        return SharpState(state.t + dt, R_new, r_new, mu, sigma, V_new,
                          self.domain.curvature(R_new), self.grid.m, slopes)

    def run(self, R0, T, dt, sigma0=None, every=1):
        if not (dt > 0 and T >= 0):
            raise InvalidArgumentError("need dt > 0 and T >= 0", dt=dt, T=T)
        steps = int(round(T / dt))
        if abs(steps * dt - T) > 1e-9 * max(T, 1.0):
            raise InvalidArgumentError("T must be a whole number of steps", T=T, dt=dt)
        state = self.initial_state(R0, sigma0)
        traj = SharpTrajectory([state], dt, self.interface_value)
        for k in range(steps):
            state = self.advance(state, dt)
            state = replace(state, t=(k + 1) * dt)
            if (k + 1) % every == 0 or k + 1 == steps:
                traj.states.append(state)
        return traj


def summary_rows(traj):
    for s in traj.states:
        yield {"t": s.t, "R": s.R, "V": s.V, "max_abs_mu": float(np.abs(s.mu).max()),
               "max_abs_sigma": float(np.abs(s.sigma).max())}
