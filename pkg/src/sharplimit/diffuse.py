"""Time integration of the diffuse-interface system on 1D and radial grids.

    u_t - lap(mu)     = 2 sigma + u - mu
    sigma_t - lap(sigma) = -(2 sigma + u - mu)
    eps mu            = -eps^2 lap(u) + f'(u)

with zero-flux ends.  Each step solves one linear system in the
interleaved unknowns (u_i, sigma_i, mu_i); it has five bands on each side
of the diagonal.  Only f' is nonlinear.  It is either shifted by a constant
(`stabilized`, convex-splitting flavour) or linearised about the previous
state (`linearized`), or the whole step is done in BDF2 form about an
extrapolated state (`bdf2`).  Adding the first two equations, weighted by
the cell volumes, cancels the reaction terms and the fluxes exactly, so
the total of u + sigma is conserved to solver precision.
"""
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .errors import InvalidArgumentError, NumericalFailureError, SimulationHaltError
from .profile import potential_derivative
from .radial import RadialDomain, cell_faces, cell_volumes, laplacian_bands

SCHEMES = ("stabilized", "linearized", "bdf2")
BLOWUP = 10.0


@dataclass(frozen=True)
class SchemeParams:
    dt: float
    eps: float
    scheme: str = "stabilized"
    kappa_s: float = 14.0
    reaction: bool = True      # False: pure Cahn-Hilliard control with sigma frozen at 0

    def __post_init__(self):
        if not self.dt >= 0:
            raise InvalidArgumentError("dt must be non-negative", dt=self.dt)
        if not self.eps > 0:
            raise InvalidArgumentError("eps must be positive", eps=self.eps)
        if self.scheme not in SCHEMES:
            raise InvalidArgumentError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "stabilized" and self.kappa_s < 8.0:
            raise InvalidArgumentError("stabilisation constant must be at least 8", kappa_s=self.kappa_s)


@dataclass(frozen=True)
class DiffuseState:
    t: float
    u: np.ndarray
    sigma: np.ndarray
    eps: float
    u_prev: np.ndarray = None    # previous level, only used by bdf2
    dt_prev: float = 0.0

    def with_fields(self, **kw):
        return replace(self, **kw)


def resolution_nodes(domain_length, eps, points_per_eps=8):
    """Grid intervals so that h <= eps / points_per_eps."""
    return int(np.ceil(points_per_eps * domain_length / eps))


class DiffuseSolver:
    def __init__(self, domain):
        self.domain = domain
        self.r = domain.uniform_nodes()
        self.vol = cell_volumes(self.r, domain.dim)
        self.lap = laplacian_bands(self.r, domain.dim)

    # pointwise pieces
    def laplacian(self, u):
        sub, _, sup = self.lap
        # difference form: exact zero on constants
        out = np.zeros_like(u, dtype=float)
        out[1:] += sub[1:] * (u[:-1] - u[1:])
        out[:-1] += sup[:-1] * (u[1:] - u[:-1])
        return out

    def chemical_potential(self, u, eps):
        if not eps > 0:
            raise InvalidArgumentError("eps must be positive", eps=eps)
        u = np.asarray(u, dtype=float)
        return (-eps ** 2 * self.laplacian(u) + potential_derivative(u, 1)) / eps

    def mass(self, state):
        return float(np.sum(self.vol * (state.u + state.sigma)))

    def energy(self, u, eps):
        f = cell_faces(self.r)[1:-1]
        g = np.diff(u) / np.diff(self.r)
        grad = np.sum(f ** (self.domain.dim - 1) * g * g * np.diff(self.r))
        return float(0.5 * eps * grad + np.sum(self.vol * potential_derivative(u)) / eps)

    def interface_position(self, u):
        """First sign change of u from the inner end, linearly interpolated."""
        s = np.sign(u)
        idx = np.nonzero(s[:-1] * s[1:] <= 0)[0]
        idx = [i for i in idx if u[i] != u[i + 1]]
        if not idx:
            return np.nan
        i = idx[0]
        r = self.r
        return float(r[i] - u[i] * (r[i + 1] - r[i]) / (u[i + 1] - u[i]))

    # implicit step
    def _assemble(self, a0, kappa, params):
        """Banded matrix for a0 * x_new / dt + (linear operators)(x_new)."""
        n = self.r.size
        N = 3 * n
        eps, dt = params.eps, params.dt
        sub, diag, sup = self.lap
        ab = np.zeros((11, N))

        def put(row, col, val):
            ab[5 + row - col, col] += val

        iu = 3 * np.arange(n)
        isg = iu + 1
        imu = iu + 2
        c = a0 / dt
        if params.reaction:
            put(iu, iu, c - 1.0)
            put(iu, isg, -2.0)
            put(iu, imu, 1.0 - diag)
            put(iu[1:], imu[:-1], -sub[1:])
            put(iu[:-1], imu[1:], -sup[:-1])
            put(isg, isg, c + 2.0 - diag)
            put(isg[1:], isg[:-1], -sub[1:])
            put(isg[:-1], isg[1:], -sup[:-1])
            put(isg, iu, 1.0)
            put(isg, imu, -1.0)
        else:
            put(iu, iu, c)
            put(iu, imu, -diag)
            put(iu[1:], imu[:-1], -sub[1:])
            put(iu[:-1], imu[1:], -sup[:-1])
            put(isg, isg, 1.0)
        put(imu, imu, eps)
        put(imu, iu, eps ** 2 * diag - kappa)
        put(imu[1:], iu[:-1], eps ** 2 * sub[1:])
        put(imu[:-1], iu[1:], eps ** 2 * sup[:-1])
        return ab

    def step(self, state, params):
        """Advance one step; returns the new state (mu is recomputed on demand)."""
        if params.eps != state.eps:
            raise InvalidArgumentError("state and scheme disagree on eps")
        if params.dt == 0:
            return state
        u0, s0 = state.u, state.sigma
        scheme = params.scheme
        if scheme == "bdf2" and state.u_prev is not None and abs(state.dt_prev - params.dt) < 1e-14:
            um = state.u_prev
            sm = state.sigma_prev
            a0 = 1.5
            hist_u = 2.0 * u0 - 0.5 * um
            hist_s = 2.0 * s0 - 0.5 * sm
            ustar = 2.0 * u0 - um
        else:
            a0 = 1.0
            hist_u, hist_s = u0, s0
            ustar = u0
        if scheme == "stabilized":
            kappa = np.full_like(u0, params.kappa_s)
        else:
            kappa = potential_derivative(ustar, 2)
        n = u0.size
        rhs = np.zeros(3 * n)
        rhs[0::3] = hist_u / params.dt
        rhs[1::3] = hist_s / params.dt if params.reaction else 0.0
        rhs[2::3] = potential_derivative(ustar, 1) - kappa * ustar
        ab = self._assemble(a0, kappa, params)
        try:
            x = linalg.solve_banded((5, 5), ab, rhs, check_finite=False)
        except (linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailureError(f"implicit step solve failed: {exc}", t=state.t) from exc
        u1 = x[0::3].copy()
        s1 = x[1::3].copy()
        if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(s1))):
            raise NumericalFailureError("implicit step produced non-finite values", t=state.t)
        new = DiffuseState(state.t + params.dt, u1, s1, state.eps, u_prev=u0, dt_prev=params.dt)
        object.__setattr__(new, "sigma_prev", s0)
        return new

    def observables(self, state):
        return {"t": state.t, "interface": self.interface_position(state.u),
                "mass": self.mass(state), "max_abs_u": float(np.abs(state.u).max()),
                "max_abs_sigma": float(np.abs(state.sigma).max()),
                "energy": self.energy(state.u, state.eps)}

    def run(self, initial, params, T, snapshot_times=None, callback=None):
        """Integrate to T; store states at the requested times (rounded to the step grid)."""
        if params.dt <= 0:
            raise InvalidArgumentError("run needs dt > 0")
        steps = int(round((T - initial.t) / params.dt))
        if steps < 0:
            raise InvalidArgumentError("T before initial time")
        if snapshot_times is None:
            snapshot_times = [initial.t, T]
        want = sorted({int(round((ts - initial.t) / params.dt)) for ts in snapshot_times})
        traj = DiffuseTrajectory(self.r, self.domain.dim, params)
        state = initial
        if 0 in want:
            traj.add(state, self)
        m0 = self.mass(state)
        # relative to the total variation of phi when the net mass is near zero
        scale = max(abs(m0), float(np.sum(self.vol * np.abs(state.u + state.sigma))), 1e-300)
        for k in range(1, steps + 1):
            state = self.step(state, params)
            object.__setattr__(state, "t", initial.t + k * params.dt)
            umax = float(np.abs(state.u).max())
            if not umax <= BLOWUP:
                raise SimulationHaltError("blow-up detected", state=state, max_abs_u=umax)
            traj.max_mass_drift = max(traj.max_mass_drift, abs(self.mass(state) - m0) / scale)
            if callback is not None:
                callback(state)
            if k in want:
                traj.add(state, self)
        return traj


@dataclass
class DiffuseTrajectory:
    r: np.ndarray
    dim: int
    params: SchemeParams
    states: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    max_mass_drift: float = 0.0

    def add(self, state, solver):
        self.states.append(state)
        row = solver.observables(state)
        self.rows.append(row)

    def times(self):
        return np.array([s.t for s in self.states])

    def interface(self):
        return np.array([row["interface"] for row in self.rows])


def uniform_ode_rhs(eps):
    """Right-hand side of the system restricted to spatially uniform fields."""
    def rhs(t, y):
        u, s = y
        g = 2.0 * s + u - potential_derivative(u, 1) / eps
        return [g, -g]
    return rhs
