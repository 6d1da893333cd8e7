"""Neumann eigenproblem for the linearised Allen-Cahn operator around the standing wave.

The operator is -d^2/dz^2 + f''(theta(z)) on (-1/eps, 1/eps) with zero
slope at both ends.  It is discretised with a five-point fourth-order
stencil; the Neumann closure reflects the grid evenly about each end node,
which keeps the quadratic form symmetric under trapezoid weights.  After
scaling by the square root of those weights the matrix is symmetric and
pentadiagonal; the lowest pairs come from sparse shift-invert Lanczos.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from .errors import InvalidArgumentError, NumericalFailureError
from .profile import potential_derivative, theta

CENSOR = 1e-13
DENSE_LIMIT = 1200


@dataclass(frozen=True)
class EigenProblem:
    eps: float
    n: int = 4001

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidArgumentError("eps must be positive", eps=self.eps)
        if self.n < 64:
            raise InvalidArgumentError("need at least 64 grid points", n=self.n)

    @property
    def h(self):
        return 2.0 / (self.eps * (self.n - 1))

    @property
    def z(self):
        return np.linspace(-1.0 / self.eps, 1.0 / self.eps, self.n)

    def potential(self):
        return potential_derivative(theta(self.z), 2)


@dataclass
class SpectralResult:
    eps: float
    values: np.ndarray          # lowest eigenvalues, ascending
    vectors: np.ndarray         # columns, unit norm in the weighted discrete L2 sense
    z: np.ndarray
    weights: np.ndarray         # trapezoid weights times h
    alpha: float = field(default=np.nan)

    @property
    def lambda1(self):
        return float(self.values[0])

    @property
    def lambda2(self):
        return float(self.values[1]) if len(self.values) > 1 else np.nan

    @property
    def q1(self):
        return self.vectors[:, 0]

    def inner(self, a, b):
        return float(np.sum(self.weights * a * b))


def trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def neumann_band(potential, h, stencil="fourth"):
    """Upper band storage of the weight-symmetrised Neumann operator.

    Returns (band, sqrt_w_ratio) where band has shape (3, n) for the
    fourth-order stencil and (2, n) for the second-order one.
    """
    v = np.asarray(potential, dtype=float)
    n = v.size
    if stencil == "second":
        c = np.array([2.0, -1.0]) / h ** 2
    elif stencil == "fourth":
        c = np.array([30.0, -16.0, 1.0]) / (12.0 * h ** 2)
    else:
        raise InvalidArgumentError(f"unknown stencil {stencil!r}")
    m = len(c) - 1
    # full (unsymmetric) reflected stencil, only a few boundary rows differ
    a = np.zeros((m + 1, n))          # a[k, i] = A[i, i+k]
    a[0] = c[0] + v
    for k in range(1, m + 1):
        a[k, : n - k] = c[k]
    lower = np.zeros((m + 1, n))      # lower[k, i] = A[i, i-k]
    for k in range(1, m + 1):
        lower[k, k:] = c[k]
    # reflection j -> -j at the left end and j -> 2(n-1)-j at the right end
    for i in range(m):
        for k in range(1, m + 1):
            j = i - k
            if j < 0:
                jr = -j
                if jr == i:
                    a[0, i] += c[k]
                elif jr > i:
                    a[jr - i, i] += c[k]
                else:
                    lower[i - jr, i] += c[k]
        ir = n - 1 - i
        for k in range(1, m + 1):
            j = ir + k
            if j > n - 1:
                jr = 2 * (n - 1) - j
                if jr == ir:
                    a[0, ir] += c[k]
                elif jr < ir:
                    lower[ir - jr, ir] += c[k]
                else:
                    a[jr - ir, ir] += c[k]
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    sw = np.sqrt(w)
    band = np.zeros((m + 1, n))
    band[m] = a[0]
    for k in range(1, m + 1):
        # S[i, i+k] = sqrt(w_i / w_{i+k}) A[i, i+k]
        band[m - k, k:] = sw[: n - k] / sw[k:] * a[k, : n - k]
    return band, sw


def band_to_dense(band):
    m = band.shape[0] - 1
    n = band.shape[1]
    s = np.diag(band[m])
    for k in range(1, m + 1):
        d = band[m - k, k:]
        s += np.diag(d, k) + np.diag(d, -k)
    return s


def band_to_sparse(band):
    m = band.shape[0] - 1
    n = band.shape[1]
    diags = [band[m]]
    offs = [0]
    for k in range(1, m + 1):
        diags += [band[m - k, k:], band[m - k, k:]]
        offs += [k, -k]
    return sparse.diags(diags, offs, shape=(n, n), format="csc")


def _lowest(band, count, floor, dense=False):
    """Smallest eigenpairs: dense eigh, or sparse shift-invert with a shift below the spectrum."""
    try:
        if dense:
            vals, vecs = linalg.eigh(band_to_dense(band), subset_by_index=[0, count - 1])
        else:
            # the discrete -d^2/dz^2 is positive semidefinite, so min(potential) - 1
            # sits strictly below the spectrum and shift-invert returns the lowest pairs
            shift = float(floor) - 1.0
            vals, vecs = splinalg.eigsh(band_to_sparse(band), k=count, sigma=shift,
                                        which="LM", tol=1e-13, maxiter=5000)
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
    except (linalg.LinAlgError, ValueError, splinalg.ArpackNoConvergence) as exc:
        raise NumericalFailureError(f"eigensolver failed: {exc}", residual=np.inf) from exc
    res = _banded_residual(band, vecs, vals)
    scale = max(1.0, np.abs(band).max())
    if not np.isfinite(res) or res > 1e-10 * scale:
        raise NumericalFailureError("eigen-residual above tolerance", residual=res)
    return vals, vecs


def _banded_residual(band, vecs, vals):
    m = band.shape[0] - 1
    n = band.shape[1]
    out = band[m][:, None] * vecs
    for k in range(1, m + 1):
        d = band[m - k, k:][:, None]
        out[:-k] += d * vecs[k:]
        out[k:] += d * vecs[:-k]
    return np.abs(out - vecs * vals).max()


def solve_lowest_pairs(problem, count=2, potential=None, stencil="fourth", dense=False):
    """Smallest `count` eigenpairs of the discrete Neumann operator.

    `potential` overrides f''(theta) (a grid array or a constant), which is
    how the constant-potential control runs.
    """
    if count not in (1, 2, 3):
        raise InvalidArgumentError("count must be 1, 2 or 3", count=count)
    z = problem.z
    pot = problem.potential() if potential is None else np.broadcast_to(
        np.asarray(potential, dtype=float), z.shape)
    if not np.all(np.isfinite(pot)):
        raise InvalidArgumentError("potential has non-finite entries")
    band, sw = neumann_band(pot, problem.h, stencil)
    vals, vecs = _lowest(band, count, pot.min(), dense=dense)
    w = trapezoid_weights(problem.n, problem.h)
    q = vecs / sw[:, None] / np.sqrt(problem.h)
    mid = problem.n // 2
    for j in range(q.shape[1]):
        s = q[mid, j] if abs(q[mid, j]) > 1e-14 else q[np.argmax(np.abs(q[:, j])), j]
        if s < 0:
            q[:, j] = -q[:, j]
    tp = theta(z, 1)
    alpha = 1.0 / np.sqrt(np.sum(w * tp * tp))
    return SpectralResult(problem.eps, vals, q, z, w, alpha)


def rayleigh_quotient(result, potential, vector, h, stencil="fourth"):
    """Discrete Rayleigh quotient of a grid vector for the same operator."""
    band, sw = neumann_band(potential, h, stencil)
    y = vector * sw
    s = band_to_dense(band) if len(y) <= DENSE_LIMIT else None
    if s is not None:
        return float(y @ s @ y / (y @ y))
    m = band.shape[0] - 1
    sy = band[m] * y
    for k in range(1, m + 1):
        d = band[m - k, k:]
        sy[:-k] += d * y[k:]
        sy[k:] += d * y[:-k]
    return float(y @ sy / (y @ y))


def eigenfunction_deviation(result, q=None):
    """Weighted ||q1 - alpha theta'||^2 on the truncated interval."""
    q = result.q1 if q is None else q
    d = q - result.alpha * theta(result.z, 1)
    return result.inner(d, d)


@dataclass
class DecayStudy:
    eps: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    censored: np.ndarray
    slope: float
    intercept: float

    @property
    def decaying(self):
        return bool(self.slope < -1e-3)

    def rows(self):
        for e, l1, l2, c in zip(self.eps, self.lambda1, self.lambda2, self.censored):
            yield {"epsilon": e, "inv_epsilon": 1.0 / e, "lambda1": l1, "lambda2": l2,
                   "log_abs_lambda1": np.log(abs(l1)) if not c else np.nan, "censored": bool(c)}


def _ladder_job(args):
    eps, n, potential, stencil = args
    res = solve_lowest_pairs(EigenProblem(eps, n), 2, potential=potential, stencil=stencil)
    return res.lambda1, res.lambda2


def lambda1_decay_study(eps_ladder, n=4001, potential=None, stencil="fourth", workers=1):
    """Fit log|lambda1| against 1/eps along a strictly decreasing ladder."""
    eps = np.asarray(eps_ladder, dtype=float)
    if eps.size < 3:
        raise InvalidArgumentError("decay fit needs at least 3 ladder entries")
    if np.any(np.diff(eps) >= 0):
        raise InvalidArgumentError("ladder must be strictly decreasing")
    jobs = [(e, n, potential, stencil) for e in eps]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_ladder_job, jobs))
    else:
        out = [_ladder_job(j) for j in jobs]
    l1 = np.array([o[0] for o in out])
    l2 = np.array([o[1] for o in out])
    cens = np.abs(l1) < CENSOR
    keep = ~cens
    if keep.sum() >= 2:
        slope, intercept = np.polyfit(1.0 / eps[keep], np.log(np.abs(l1[keep])), 1)
    else:
        slope, intercept = np.nan, np.nan
    return DecayStudy(eps, l1, l2, cens, float(slope), float(intercept))


# Rayleigh bounds for a layer field on (0, 1)

def _check_field(u):
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size < 8:
        raise InvalidArgumentError("field must be a 1D grid array with at least 8 nodes")
    if not np.all(np.isfinite(u)):
        raise InvalidArgumentError("field contains non-finite values")
    return u


def rayleigh_lower_bound(u, eps, form="flat", stencil="fourth"):
    """Smallest eigenvalue of the layer-linearised form on (0, 1).

    flat:      -d^2/dx^2 + eps^-2 f''(u), Neumann.
    weighted:  eps*int v'^2 + eps^-1 int f''(u) v^2 against int w'^2 with
               -w'' = v, Neumann, on the mean-zero subspace.
    """
    u = _check_field(u)
    if not eps > 0:
        raise InvalidArgumentError("eps must be positive", eps=eps)
    n = u.size
    h = 1.0 / (n - 1)
    fpp = potential_derivative(u, 2)
    if form == "flat":
        band, _ = neumann_band(fpp / eps ** 2, h, stencil)
        vals, _ = _lowest(band, 1, fpp.min() / eps ** 2, dense=n <= DENSE_LIMIT)
        return float(vals[0])
    if form != "weighted":
        raise InvalidArgumentError(f"unknown form {form!r}")
    lap_band, sw = neumann_band(np.zeros(n), h, stencil)
    lap = band_to_dense(lap_band)
    quad_form = eps * lap + np.diag(fpp / eps)
    # mean-zero subspace in the scaled coordinates is the complement of sqrt(w)
    e = sw / np.linalg.norm(sw)
    basis = linalg.null_space(e[None, :])
    # substituting y = lap x turns the inverse-Laplacian weight into lap itself
    lhs = basis.T @ (lap @ quad_form @ lap) @ basis
    rhs = basis.T @ lap @ basis
    lhs = 0.5 * (lhs + lhs.T)
    rhs = 0.5 * (rhs + rhs.T)
    try:
        vals = linalg.eigh(lhs, rhs, eigvals_only=True, subset_by_index=[0, 0])
    except linalg.LinAlgError as exc:
        raise NumericalFailureError(f"generalised eigensolve failed: {exc}") from exc
    return float(vals[0])
