"""Riesz and Coulomb interaction kernels and their constants.

The kernel is g(x) = -log|x| for s = 0 and |x|^{-s}/s otherwise, for
d - 2 <= s < d.
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import integrate, special

from .errors import KernelRangeError, SingularEvaluationError, UnsupportedError
from .util import as_points

logger = logging.getLogger(__name__)

Real = Union[float, np.ndarray]


@dataclass(frozen=True)
class RieszKernel:
    "Interaction kernel selected by dimension d and exponent s"

    d: int
    s: float

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 1:
            raise KernelRangeError(f"Dimension must be a positive integer: {self.d}")
        if not (self.d - 2 <= self.s < self.d):
            raise KernelRangeError(
                f"Exponent s={self.s} outside [{self.d - 2}, {self.d}) for d={self.d}"
            )

    @property
    def is_log(self) -> bool:
        return self.s == 0

    @property
    def is_coulomb(self) -> bool:
        return self.s == self.d - 2

    def __str__(self) -> str:
        return f"RieszKernel(d={self.d}, s={self.s:g})"

    def g(self, r: Real) -> Real:
        """Radial profile g(r); +inf at r = 0 when s >= 0"""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            if self.s == 0:
                out = -np.log(r)
            else:
                out = np.power(r, -self.s) / self.s
        return out if out.ndim else float(out)

    def dg(self, r: Real) -> Real:
        "Radial derivative g'(r) = -r^{-s-1}"
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            out = -np.power(r, -self.s - 1)
        return out if out.ndim else float(out)

    def value(self, x: np.ndarray) -> np.ndarray:
        "g at the points x[..., :]"
        return np.asarray(self.g(np.linalg.norm(x, axis=-1)))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Gradient -x |x|^{-s-2} at the points x[..., :]

        At the origin the gradient is 0 for s < 0 and nan otherwise.
        """
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = -np.power(r, -self.s - 2)
            out = scale[..., None] * x
        if np.any(r == 0):
            out[r == 0] = 0.0 if self.s < 0 else np.nan
        return out

    def hessian(self, x: np.ndarray) -> np.ndarray:
        "Hessian |x|^{-s-2}((s+2) xhat xhat^T - I), shape (..., d, d)"
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            xhat = x / r[..., None]
            outer = xhat[..., :, None] * xhat[..., None, :]
            out = np.power(r, -self.s - 2)[..., None, None] * (
                (self.s + 2) * outer - np.eye(self.d)
            )
        return out


def sphere_area(d: int) -> float:
    "|S^{d-1}|; equals 2 for d = 1"
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def coulomb_constant(d: int) -> float:
    "c_d with -Delta g = c_d delta for the Coulomb kernel in dimension d >= 2"
    if d < 2:
        raise UnsupportedError(
            "The Coulomb constant is defined for d >= 2; use riesz_constant(1, -1)"
        )
    if d == 2:
        return 2 * math.pi
    return sphere_area(d)


def riesz_constant(d: int, s: float) -> float:
    """c_{d,s} for the kernel with exponent s in dimension d.

    2pi for s = 0 with d in {1, 2}; |S^{d-1}| for the Coulomb case s = d - 2 > 0;
    2^{d-s} pi^{d/2} Gamma((d-s)/2) / Gamma(s/2) for max(0, d-2) < s < d; and 2
    for the one-dimensional Coulomb kernel -|x|.
    """
    RieszKernel(d, s)
    if s == 0 and d in (1, 2):
        return 2 * math.pi
    if d == 1 and s == -1:
        return 2.0
    if s == d - 2 and s > 0:
        return coulomb_constant(d)
    if s > max(0, d - 2):
        scale = 2 ** (d - s) * math.pi ** (d / 2)
        return scale * math.gamma((d - s) / 2) / math.gamma(s / 2)
    raise UnsupportedError(f"No tabulated constant for d={d}, s={s}")


def fractional_constant(d: int, s: float) -> float:
    """kappa with (-Delta)^{(d-s)/2} g = kappa delta on R^d.

    Agrees with riesz_constant for the Coulomb kernels. In the strict Riesz
    case it is riesz_constant/s, since riesz_constant normalizes |x|^{-s}.
    """
    RieszKernel(d, s)
    if s == 0:
        return 2 ** (d - 1) * math.pi ** (d / 2) * math.gamma(d / 2)
    return float(
        2 ** (d - s)
        * math.pi ** (d / 2)
        * math.gamma((d - s) / 2)
        / (s * special.gamma(s / 2))
    )


def eval_g(kernel: RieszKernel, x: np.ndarray) -> Real:
    "g(x), raising SingularEvaluationError at the origin when s >= 0"
    points = as_points(x, kernel.d)
    r = np.linalg.norm(points, axis=-1)
    if kernel.s >= 0 and np.any(r == 0):
        raise SingularEvaluationError(f"{kernel} evaluated at the origin")
    values = np.asarray(kernel.g(r))
    return float(values[0]) if np.ndim(x) <= 1 and values.size == 1 else values


def _truncation_level(kernel: RieszKernel, eta: float) -> float:
    if eta < 0 or (eta == 0 and kernel.s >= 0):
        raise ValueError(f"Truncation radius must be positive, got {eta}")
    return float(kernel.g(eta))


def eval_f_eta(kernel: RieszKernel, x: np.ndarray, eta: float) -> Real:
    """f_eta = (g - g(eta))_+, supported in B(0, eta); +inf at 0 for s >= 0"""
    level = _truncation_level(kernel, eta)
    points = as_points(x, kernel.d)
    g = np.asarray(kernel.g(np.linalg.norm(points, axis=-1)))
    values = np.maximum(g - level, 0)
    return float(values[0]) if np.ndim(x) <= 1 and values.size == 1 else values


def eval_g_eta(kernel: RieszKernel, x: np.ndarray, eta: float) -> Real:
    "g_eta = min(g, g(eta)), the potential of a unit charge smeared on a sphere"
    level = _truncation_level(kernel, eta)
    points = as_points(x, kernel.d)
    values = np.minimum(np.asarray(kernel.g(np.linalg.norm(points, axis=-1))), level)
    return float(values[0]) if np.ndim(x) <= 1 and values.size == 1 else values


def truncation_mass(kernel: RieszKernel, eta: float) -> float:
    """Integral of |f_eta| over R^d by radial quadrature.

    The exact value is |S^{d-1}| eta^{d-s} / (d (d-s)).
    """
    level = _truncation_level(kernel, eta)
    if eta == 0:
        return 0.0

    def radial(u: float) -> float:
        r = eta * u
        return (float(kernel.g(r)) - level) * r ** (kernel.d - 1) * eta

    value, error = integrate.quad(radial, 0.0, 1.0, limit=200)
    logger.debug(f"truncation mass {value} (+- {error}) for eta={eta}")
    return sphere_area(kernel.d) * value


def sphere_quadrature(d: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes on the unit sphere S^{d-1} and weights summing to 1.

    d = 2 uses n equispaced angles; d = 3 uses n Gauss-Legendre nodes in
    cos(theta) times 2n equispaced azimuths.
    """
    if d == 2:
        phi = 2 * math.pi * np.arange(n) / n
        nodes = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return nodes, np.full(n, 1.0 / n)
    if d == 3:
        t, w = np.polynomial.legendre.leggauss(n)
        phi = 2 * math.pi * np.arange(2 * n) / (2 * n)
        tt, pp = np.meshgrid(t, phi, indexing="ij")
        st = np.sqrt(1 - tt**2)
        nodes = np.stack([st * np.cos(pp), st * np.sin(pp), tt], axis=-1).reshape(-1, 3)
        weights = np.repeat(w / 2, 2 * n) / (2 * n)
        return nodes, weights
    raise UnsupportedError(f"Sphere quadrature implemented for d in (2, 3), not {d}")


@dataclass(frozen=True)
class SmearedCharge:
    "Uniform unit mass on the sphere of radius eta around center"

    center: Tuple[float, ...]
    eta: float

    @property
    def d(self) -> int:
        return len(self.center)

    def potential(self, kernel: RieszKernel, x: np.ndarray, order: int = 256) -> Real:
        """Potential of the smeared charge at x, by sphere quadrature"""
        if not kernel.is_coulomb or kernel.d != self.d:
            raise UnsupportedError("Smeared charges are defined for Coulomb kernels")
        nodes, weights = sphere_quadrature(self.d, order)
        points = as_points(x, self.d)
        charges = np.asarray(self.center) + self.eta * nodes
        dist = np.linalg.norm(points[:, None, :] - charges[None, :, :], axis=-1)
        values = np.asarray(kernel.g(dist)) @ weights
        return float(values[0]) if np.ndim(x) <= 1 and values.size == 1 else values


def upper_gamma(a: float, z: Real) -> Real:
    """Upper incomplete gamma function Gamma(a, z) for any real a and z > 0"""
    z = np.asarray(z, dtype=float)
    if a > 0:
        out = special.gammaincc(a, z) * special.gamma(a)
    elif a == 0:
        out = special.exp1(z)
    else:
        out = (np.asarray(upper_gamma(a + 1, z)) - np.power(z, a) * np.exp(-z)) / a
    return out if np.ndim(out) else float(out)
