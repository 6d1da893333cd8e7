"""Double-well potential, standing-wave profile, mollifier and cutoff.

Everything here is a pure function of its arguments or an immutable
dataclass, so it is safe to share between workers.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import InvalidArgumentError

SQRT2 = np.sqrt(2.0)
TAIL = 40.0  # truncation of whole-line integrals in the stretched variable


def potential_derivative(u, order=0):
    """f(u) = (u^2 - 1)^2 and its derivatives up to order 3."""
    u = np.asarray(u, dtype=float)
    if order == 0:
        return (u * u - 1.0) ** 2
    if order == 1:
        return 4.0 * u * (u * u - 1.0)
    if order == 2:
        return 12.0 * u * u - 4.0
    if order == 3:
        return 24.0 * u
    raise InvalidArgumentError(f"unsupported derivative order {order!r}", order=order)


def _sech2(x):
    # 4t/(1+t)^2 with t = exp(-2|x|) never overflows
    t = np.exp(-2.0 * np.abs(x))
    return 4.0 * t / (1.0 + t) ** 2


def theta(z, order=0):
    """Standing wave tanh(sqrt(2) z) and its first two derivatives."""
    z = np.asarray(z, dtype=float)
    x = SQRT2 * z
    if order == 0:
        return np.tanh(x)
    if order == 1:
        return SQRT2 * _sech2(x)
    if order == 2:
        return -4.0 * np.tanh(x) * _sech2(x)
    raise InvalidArgumentError(f"unsupported derivative order {order!r}", order=order)


@lru_cache(maxsize=None)
def surface_tension():
    """S = integral of sqrt(2 f(u)) over (-1, 1), by adaptive quadrature."""
    val, _ = integrate.quad(lambda u: np.sqrt(2.0 * potential_derivative(u)), -1.0, 1.0,
                            epsabs=1e-13, epsrel=1e-13)
    return val


def surface_tension_whole_line(half_width=TAIL):
    """Same constant computed as the integral of theta'(z)^2 over the line."""
    val, _ = integrate.quad(lambda z: theta(z, 1) ** 2, -half_width, half_width,
                            epsabs=1e-13, epsrel=1e-13, limit=400, points=[0.0])
    return val


# C-infinity bump and its normalisation
def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out


_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _half_integral(a):
    """int_{-1}^{a} bump for a <= 0 by Gauss-Legendre."""
    half = 0.5 * (a + 1.0)
    nodes = -1.0 + half[..., None] * (_GL_X + 1.0)
    return half * (_bump(nodes) @ _GL_W)


@lru_cache(maxsize=None)
def _bump_norm():
    # same rule as the primitive, so eta(0) = 1/2 and eta(z) + eta(-z) = 1 hold to rounding
    return 0.5 / float(_half_integral(np.array(0.0)))


def _bump_primitive(z):
    """N * int_{-1}^{z} bump(s) ds, vectorised with Gauss-Legendre on [-1, z]."""
    z = np.clip(np.asarray(z, dtype=float), -1.0, 1.0)
    # integrate over the shorter piece and use eta(z) = 1 - eta(-z) on the right half
    left = _bump_norm() * _half_integral(-np.abs(z))
    return np.where(z > 0, 1.0 - left, left)


def _step_bump(z, derivative):
    z = np.asarray(z, dtype=float)
    if derivative == 0:
        out = _bump_primitive(z)
        out = np.where(z >= 1.0, 1.0, out)
        return np.where(z <= -1.0, 0.0, out)
    d1 = _bump_norm() * _bump(z)
    if derivative == 1:
        return d1
    if derivative == 2:
        inside = np.abs(z) < 1.0
        zz = np.where(inside, z, 0.0)
        return np.where(inside, d1 * (-2.0 * zz / (1.0 - zz * zz) ** 2), 0.0)
    raise InvalidArgumentError(f"unsupported derivative order {derivative!r}")


def _step_poly7(z, derivative):
    # smootherstep of degree 7 (C^3): derivative (35/32)(1 - z^2)^3 on [-1, 1]
    z = np.clip(np.asarray(z, dtype=float), -1.0, 1.0)
    if derivative == 0:
        return 0.5 + (35.0 * z - 35.0 * z ** 3 + 21.0 * z ** 5 - 5.0 * z ** 7) / 32.0
    w = 1.0 - z * z
    if derivative == 1:
        return 35.0 / 32.0 * w ** 3
    if derivative == 2:
        return -6.0 * z * 35.0 / 32.0 * w ** 2
    raise InvalidArgumentError(f"unsupported derivative order {derivative!r}")


_STEPS = {"bump": _step_bump, "poly7": _step_poly7}


@dataclass(frozen=True)
class Mollifier:
    """Smooth non-decreasing switch with plateaus 0 for z <= -1 and 1 for z >= 1.

    `shift` is the offset used by the shifted variants eta(-shift +/- z).
    `variant` selects the construction ("bump" is the default, "poly7" is a
    C^3 polynomial alternative used for sensitivity checks).
    """

    shift: float = 2.0
    variant: str = "bump"

    def __post_init__(self):
        if self.variant not in _STEPS:
            raise InvalidArgumentError(f"unknown mollifier variant {self.variant!r}")
        if not np.isfinite(self.shift) or self.shift < 2.0:
            raise InvalidArgumentError("mollifier shift must be finite and >= 2", shift=self.shift)

    def __call__(self, z, derivative=0):
        return _STEPS[self.variant](z, derivative)

    def evaluate(self, z, kind="plain", derivative=0):
        step = _STEPS[self.variant]
        z = np.asarray(z, dtype=float)
        if kind == "plain":
            return step(z, derivative)
        if kind == "plus":
            return step(-self.shift + z, derivative)
        if kind == "minus":
            # d/dz of eta(-M - z) picks up a sign per derivative
            return (-1.0) ** derivative * step(-self.shift - z, derivative)
        raise InvalidArgumentError(f"unknown mollifier kind {kind!r}")


def mollifier_eval(z, kind="plain", derivative=0, shift=2.0, variant="bump"):
    return Mollifier(shift=shift, variant=variant).evaluate(z, kind, derivative)


def cutoff(s, variant="bump"):
    """zeta(s): 1 for |s| <= 1/2, 0 for |s| >= 1, smooth in between."""
    s = np.asarray(s, dtype=float)
    return 1.0 - _STEPS[variant](4.0 * np.abs(s) - 3.0, 0)
