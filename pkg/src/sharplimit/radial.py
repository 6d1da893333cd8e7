"""Finite-volume operators on 1D and radially symmetric node grids.

Control volumes are centred on the nodes and cut at the midpoints, with
half cells at both ends.  The zero-flux closure at the ends is both the
homogeneous Neumann condition and, at r = 0 for balls, the regularity
condition.  Multiplying a row by its cell volume gives a symmetric matrix,
so sum(volume * laplacian(u)) is zero to rounding: this is what makes the
diffuse scheme conserve mass exactly.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import InvalidArgumentError, NumericalFailureError


def cell_faces(r):
    r = np.asarray(r, dtype=float)
    faces = np.empty(r.size + 1)
    faces[0] = r[0]
    faces[-1] = r[-1]
    faces[1:-1] = 0.5 * (r[1:] + r[:-1])
    return faces


def cell_volumes(r, dim):
    """Volume of each control volume per unit solid angle."""
    f = cell_faces(r)
    return (f[1:] ** dim - f[:-1] ** dim) / dim


def laplacian_bands(r, dim):
    """(sub, diag, sup) of the FV Laplacian with zero-flux ends.

    sub[i] couples node i to i-1, sup[i] couples node i to i+1.
    """
    r = np.asarray(r, dtype=float)
    vol = cell_volumes(r, dim)
    f = cell_faces(r)[1:-1]
    coef = f ** (dim - 1) / np.diff(r)           # face transmissibility
    sub = np.zeros(r.size)
    sup = np.zeros(r.size)
    sub[1:] = coef / vol[1:]
    sup[:-1] = coef / vol[:-1]
    diag = -(sub + sup)
    return sub, diag, sup


def apply_laplacian(u, r, dim):
    sub, _, sup = laplacian_bands(r, dim)
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    out[1:] += sub[1:] * (u[:-1] - u[1:])
    out[:-1] += sup[:-1] * (u[1:] - u[:-1])
    return out


def tridiag_solve(sub, diag, sup, rhs):
    """Solve a tridiagonal system given row-wise couplings (LAPACK gtsv via banded storage)."""
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1] = diag
    ab[2, :-1] = sub[1:]
    try:
        x = linalg.solve_banded((1, 1), ab, rhs)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailureError(f"tridiagonal solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NumericalFailureError("tridiagonal solve returned non-finite values")
    return x


def integrate(u, r, dim):
    """Midpoint-cell quadrature of u over the domain (per unit solid angle)."""
    return float(np.sum(cell_volumes(r, dim) * u))


def solid_angle(dim):
    return {1: 1.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}[dim]


def one_sided_slope(u, r, index, side):
    """Second-order one-sided derivative at node `index` from the given side.

    Assumes locally uniform spacing on that side (true on each sub-grid).
    """
    if side < 0:
        h = r[index] - r[index - 1]
        return (3.0 * u[index] - 4.0 * u[index - 1] + u[index - 2]) / (2.0 * h)
    h = r[index + 1] - r[index]
    return (-3.0 * u[index] + 4.0 * u[index + 1] - u[index + 2]) / (2.0 * h)


def central_slope(u, r):
    """Three-point derivative on a possibly nonuniform grid; one-sided at the ends."""
    u = np.asarray(u, dtype=float)
    d = np.empty_like(u)
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    d[1:-1] = (hm ** 2 * (u[2:] - u[1:-1]) + hp ** 2 * (u[1:-1] - u[:-2])) / (hm * hp * (hm + hp))
    d[0] = (u[1] - u[0]) / (r[1] - r[0])
    d[-1] = (u[-1] - u[-2]) / (r[-1] - r[-2])
    return d


def neumann_poisson(rhs, r, dim):
    """Mean-zero solution of -lap(psi) = rhs - mean(rhs) with zero-flux ends.

    Returns (psi, removed_mean).
    """
    rhs = np.asarray(rhs, dtype=float)
    vol = cell_volumes(r, dim)
    mean = float(np.sum(vol * rhs) / np.sum(vol))
    b = rhs - mean
    sub, diag, sup = laplacian_bands(r, dim)
    # pin the singular direction: solve with node 0 fixed, then shift to zero mean
    n = rhs.size
    d = -diag.copy()
    lo = -sub.copy()
    up = -sup.copy()
    d[0], up[0] = 1.0, 0.0
    bb = b.copy()
    bb[0] = 0.0
    psi = tridiag_solve(lo, d, up, bb)
    psi -= np.sum(vol * psi) / np.sum(vol)
    return psi, mean


def dirichlet_poisson(rhs, r, dim, both_ends=False):
    """Solution of -lap(psi) = rhs with psi = 0 at the outer end.

    The inner end is zero-flux (the centre of a ball) unless `both_ends`.
    """
    sub, diag, sup = laplacian_bands(r, dim)
    d = -diag.copy()
    lo = -sub.copy()
    up = -sup.copy()
    b = np.asarray(rhs, dtype=float).copy()
    d[-1], lo[-1] = 1.0, 0.0
    b[-1] = 0.0
    if both_ends:
        d[0], up[0] = 1.0, 0.0
        b[0] = 0.0
    return tridiag_solve(lo, d, up, b)


def gradient_energy(psi, r, dim):
    """sqrt of the integral of |psi'|^2, using face differences."""
    f = cell_faces(r)[1:-1]
    g = np.diff(psi) / np.diff(r)
    return float(np.sqrt(np.sum(f ** (dim - 1) * g * g * np.diff(r))))


@dataclass(frozen=True)
class RadialDomain:
    """1D interval [r_in, r_out] (dim 1) or ball of radius r_out (dim 2 or 3).

    `n` is the number of grid intervals, so grids carry n + 1 nodes.
    """

    dim: int = 2
    r_out: float = 1.0
    n: int = 400
    r_in: float = 0.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise InvalidArgumentError("dimension must be 1, 2 or 3", dim=self.dim)
        if not self.r_out > self.r_in:
            raise InvalidArgumentError("need r_out > r_in", r_in=self.r_in, r_out=self.r_out)
        if self.dim > 1 and self.r_in != 0.0:
            raise InvalidArgumentError("balls are centred at r = 0")
        if self.n < 8:
            raise InvalidArgumentError("need at least 8 grid intervals", n=self.n)

    @property
    def kind(self):
        return "interval" if self.dim == 1 else "ball"

    @property
    def length(self):
        return self.r_out - self.r_in

    @property
    def h(self):
        return self.length / self.n

    def uniform_nodes(self):
        return np.linspace(self.r_in, self.r_out, self.n + 1)

    def curvature(self, R):
        """Mean curvature -(dim-1)/R of the sphere {r = R}, taken as minus the Laplacian of r - R."""
        return -(self.dim - 1) / R if self.dim > 1 else 0.0
