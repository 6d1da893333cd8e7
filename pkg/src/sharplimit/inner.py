"""Universal stretched-variable functions for the transition-layer expansion.

Everything here depends only on the profile and the mollifier, never on
the geometry, so tables are built once per mollifier variant and cached.

Two integral operators do the work:

* `vc_solve(g)`: the bounded solution of -w'' + f''(theta) w = g with
  w(0) = 0, by variation of constants.  The part of g that tends to its
  limits g(+-inf) is handled in closed form (`_unit_response`), so the
  numerical quadrature only sees a remainder that decays with the profile.
  Without this split the nested integrals lose all accuracy in the tails.
* `double_integral(g)`: int_{-inf}^{z} int_{z'}^{inf} g, minus eta(z) times
  its total, which tends to zero at both ends.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, interpolate

from .errors import ConsistencyError
from .profile import SQRT2, TAIL, Mollifier, potential_derivative, surface_tension, theta

Z_STEP = 0.005
Z_REMAINDER = 20.0     # beyond this the remainder term is below 1e-20


def z_grid(half_width=TAIL, step=Z_STEP):
    n = int(round(2 * half_width / step)) + 1
    return np.linspace(-half_width, half_width, n)


def _unit_response(z):
    """Solution A of -A'' + f''(theta) A = 1 on z > 0 with A(0) = 0, A bounded; even extension."""
    x = SQRT2 * np.abs(z)
    e2 = np.exp(-2.0 * x)
    num = 0.5 + (3.0 * x + 1.25) * e2 - 1.5 * e2 ** 2 - 0.25 * e2 ** 3
    return 0.25 * num / (1.0 + e2) ** 2


def _cumtrapz(y, z):
    return integrate.cumulative_trapezoid(y, z, initial=0.0)


def vc_solve(g, z, g_minus, g_plus, tol=1e-9):
    """Variation-of-constants solution with w(0) = 0 for samples g on the symmetric grid z.

    g_minus and g_plus are the limits of g at -inf and +inf.
    Raises ConsistencyError when int g theta' dz is not zero.
    """
    tp = theta(z, 1)
    mid = len(z) // 2
    if abs(z[mid]) > 1e-14:
        raise ValueError("grid must be symmetric with a node at zero")
    right = slice(mid, None)
    left = slice(0, mid + 1)
    # remainders R(s) = int_s^inf (g - g+) theta' on the right, -int_-inf^s (g - g-) theta' on the left
    rr = (g[right] - g_plus) * tp[right]
    Rp = _cumtrapz(rr[::-1], -z[right][::-1])[::-1]
    rl = (g[left] - g_minus) * tp[left]
    Rm = -_cumtrapz(rl, z[left])
    jump = (g_plus + Rp[0]) - (-g_minus + Rm[-1])
    scale = max(1.0, np.abs(g).max())
    if abs(jump) > tol * scale:
        raise ConsistencyError("solvability integral of the forcing against theta' is not zero",
                               condition="orthogonality to theta'", residual=float(jump))
    out = np.where(z >= 0, g_plus, g_minus) * _unit_response(z)
    # remainder term theta'(z) int_0^z R / theta'^2, truncated where it is negligible
    zr = z[right]
    keep = zr <= Z_REMAINDER
    ip = _cumtrapz(Rp[keep] / tp[right][keep] ** 2, zr[keep])
    tail_r = np.zeros(zr.size)
    tail_r[keep] = tp[right][keep] * ip
    zl = z[left][::-1]
    keepl = zl >= -Z_REMAINDER
    Rl = Rm[::-1]
    il = _cumtrapz(Rl[keepl] / tp[left][::-1][keepl] ** 2, zl[keepl])
    tail_l = np.zeros(zl.size)
    tail_l[keepl] = tp[left][::-1][keepl] * il
    out[mid:] += tail_r
    out[: mid + 1] += tail_l[::-1]
    return out


def double_integral(g, z, eta):
    """int_{-inf}^{z} int_{z'}^{inf} g dz'' dz' minus eta(z) times the full double integral."""
    G = _cumtrapz(g[::-1], -z[::-1])[::-1]       # int_{z'}^{inf} g
    D = _cumtrapz(G, z)
    return D - eta * D[-1], float(D[-1])


@dataclass
class InnerTables:
    """Tabulated stretched-variable functions for one mollifier variant."""

    z: np.ndarray
    mollifier: Mollifier
    c2: float        # int eta theta'
    c3: float        # int (1 - eta) theta'
    c4: float        # int eta' theta'
    tables: dict
    curvature_coeff: float     # int f'''(theta) W^2 theta' / 2, W the curvature response
    log_moment: float          # int log cosh(sqrt2 z)/sqrt2 * theta'

    def __post_init__(self):
        self._splines = {k: interpolate.CubicSpline(self.z, v) for k, v in self.tables.items()}

    def __call__(self, name, z):
        z = np.asarray(z, dtype=float)
        zc = np.clip(z, self.z[0], self.z[-1])
        return self._splines[name](zc)

    def limits(self, name):
        v = self.tables[name]
        return float(v[0]), float(v[-1])


@lru_cache(maxsize=4)
def inner_tables(variant="bump", step=Z_STEP):
    z = z_grid(step=step)
    mol = Mollifier(variant=variant)
    S = surface_tension()
    th = theta(z)
    tp = theta(z, 1)
    eta = mol(z)
    deta = mol(z, 1)
    d2eta = mol(z, 2)
    wsum = lambda y: float(integrate.trapezoid(y, z))
    c2 = wsum(eta * tp)
    c3 = wsum((1.0 - eta) * tp)
    c4 = wsum(deta * tp)
    tabs = {}
    # responses to curvature, outer mu on the + side and on the - side
    tabs["curv"] = vc_solve(tp - S / c4 * deta, z, 0.0, 0.0)
    tabs["plus"] = vc_solve(eta - c2 / c4 * deta, z, 0.0, 1.0)
    tabs["minus"] = vc_solve(1.0 - eta - c3 / c4 * deta, z, 1.0, 0.0)
    tabs["jump"], _ = double_integral(z * d2eta + deta, z, eta)
    tabs["speed"], _ = double_integral(tp - 2.0 * deta, z, eta)
    tabs["theta_shift"] = tp / tp[len(z) // 2]
    # order-one interface constants of the limit problem (constant mu forcing)
    W = vc_solve(tp - 0.5 * S, z, -0.5 * S, -0.5 * S)
    J = 0.5 * wsum(potential_derivative(th, 3) * W * W * tp)
    logc = np.log(np.cosh(SQRT2 * np.clip(z, -300, 300))) / SQRT2
    I1 = wsum(logc * tp)
    return InnerTables(z, mol, c2, c3, c4, tabs, J, I1)


def solvability_integral(curvature, mu_interface, variant="bump"):
    """int (theta' lap(d) + mu_tilde) theta' dz on the interface, where lap(d) = -curvature."""
    t = inner_tables(variant)
    tp = theta(t.z, 1)
    forcing = -curvature * tp + mu_interface
    return float(integrate.trapezoid(forcing * tp, t.z))
