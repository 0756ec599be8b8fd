"""Probability densities: analytic families and gridded densities.

Every density exposes its potential h^mu(x) = int g(x - y) dmu(y), its self
energy, and a quadrature rule (nodes, weights) with sum(weights) = 1 used for
every other integral against mu.
"""
import logging
import math
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import signal

from .errors import QuadratureError, UnsupportedError
from .kernels import RieszKernel, sphere_area
from .util import FLOAT_FORMAT, as_points

logger = logging.getLogger(__name__)

Quadrature = Tuple[np.ndarray, np.ndarray]


class Density(ABC):
    """Compactly supported probability density on R^d"""

    d: int

    @abstractmethod
    def values(self, x: np.ndarray) -> np.ndarray:
        "Density values at points of shape (M, d)"

    @abstractmethod
    def mass(self) -> float:
        ...

    @abstractmethod
    def quadrature(self) -> Quadrature:
        "Nodes (M, d) and weights (M,) with sum f(node) w ~ int f dmu"

    @abstractmethod
    def potential(self, kernel: RieszKernel, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def self_energy(self, kernel: RieszKernel) -> float:
        "Double integral of g(x - y) dmu(x) dmu(y)"

    @abstractmethod
    def sup(self) -> float:
        "The sup norm of the density"

    @abstractmethod
    def entropy(self) -> float:
        "int mu log mu"

    @abstractmethod
    def ball_mass(self, center: Sequence[float], radius: float) -> float:
        ...

    @abstractmethod
    def dilate(self, t: float) -> "Density":
        "Push-forward by x -> t x"

    @abstractmethod
    def translate(self, shift: Sequence[float]) -> "Density":
        ...

    @abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        "n i.i.d. points"

    @property
    @abstractmethod
    def center(self) -> np.ndarray:
        ...

    @property
    @abstractmethod
    def radius(self) -> float:
        "Radius of a ball around center containing the support"

    def in_support(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.values(as_points(x, self.d)) > 0)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        nodes, weights = self.quadrature()
        return float(np.dot(np.asarray(f(nodes), dtype=float), weights))

    def describe(self) -> Dict[str, Any]:
        return {"family": type(self).__name__, "d": self.d}


def line_primitive(kernel: RieszKernel, w: np.ndarray) -> np.ndarray:
    "P(w) = int_0^w g(t) dt for the one-dimensional kernel, s < 1"
    w = np.asarray(w, dtype=float)
    a = np.abs(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kernel.s == 0:
            out = w - w * np.log(a)
        else:
            out = np.sign(w) * np.power(a, 1 - kernel.s) / (kernel.s * (1 - kernel.s))
    return np.where(a == 0, 0.0, out)


def _log_rectangle_primitive(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Q(a, b) with d^2 Q / da db = log(a^2 + b^2)"""
    r2 = a * a + b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        q = a * b * (np.log(r2) - 3)
        q = np.where(r2 == 0, 0.0, q)
        q = q + np.where(a == 0, 0.0, a * a * np.arctan(b / np.where(a == 0, 1, a)))
        q = q + np.where(b == 0, 0.0, b * b * np.arctan(a / np.where(b == 0, 1, b)))
    return q


def cell_kernel(kernel: RieszKernel, z: np.ndarray, h: float) -> np.ndarray:
    """int g(z - u) du over the cube of side h centred at 0

    Closed forms exist in d = 1 (all s) and for d = 2, s = 0.
    """
    z = np.asarray(z, dtype=float)
    half = h / 2
    if kernel.d == 1:
        return line_primitive(kernel, z[..., 0] + half) - line_primitive(
            kernel, z[..., 0] - half
        )
    if kernel.d == 2 and kernel.s == 0:
        x0, x1 = z[..., 0] - half, z[..., 0] + half
        y0, y1 = z[..., 1] - half, z[..., 1] + half
        q = (
            _log_rectangle_primitive(x1, y1)
            - _log_rectangle_primitive(x0, y1)
            - _log_rectangle_primitive(x1, y0)
            + _log_rectangle_primitive(x0, y0)
        )
        return -0.5 * q
    raise QuadratureError(f"No product-integration rule for {kernel} on a grid")


class AnalyticDensity(Density):
    _center: np.ndarray
    _radius: float
    #: number of radial quadrature nodes
    order: int

    @property
    def center(self) -> np.ndarray:
        return self._center

    @property
    def radius(self) -> float:
        return self._radius

    def _offsets(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        y = as_points(x, self.d) - self._center
        return y, np.linalg.norm(y, axis=-1)

    def describe(self) -> Dict[str, Any]:
        return {
            "family": type(self).__name__,
            "d": self.d,
            "radius": self._radius,
            "center": self._center.tolist(),
        }


class UniformBall(AnalyticDensity):
    """Uniform probability density on the ball B(center, radius)"""

    def __init__(
        self,
        d: int,
        radius: float = 1.0,
        center: Optional[Sequence[float]] = None,
        order: int = 32,
    ):
        if radius <= 0:
            raise ValueError(f"Radius must be positive, got {radius}")
        self.d = d
        self._radius = float(radius)
        self._center = np.zeros(d) if center is None else np.asarray(center, float)
        self.order = order
        #: density value on the ball
        self.level = d / (sphere_area(d) * radius**d)

    def values(self, x: np.ndarray) -> np.ndarray:
        _, r = self._offsets(x)
        return np.where(r <= self._radius, self.level, 0.0)

    def mass(self) -> float:
        return 1.0

    def sup(self) -> float:
        return self.level

    def entropy(self) -> float:
        return math.log(self.level)

    def potential(self, kernel: RieszKernel, x: np.ndarray) -> np.ndarray:
        y, r = self._offsets(x)
        R = self._radius
        if self.d == 1:
            upper = line_primitive(kernel, y[:, 0] + R)
            return (upper - line_primitive(kernel, y[:, 0] - R)) / (2 * R)
        if kernel.is_coulomb:
            with np.errstate(divide="ignore"):
                outside = np.asarray(kernel.g(r), dtype=float)
            inside = float(kernel.g(R)) + (R**2 - r**2) / (2 * R**self.d)
            return np.where(r <= R, inside, outside)
        raise UnsupportedError(f"No closed-form potential of a ball for {kernel}")

    def self_energy(self, kernel: RieszKernel) -> float:
        R = self._radius
        if self.d == 1:
            if kernel.s == 0:
                return -math.log(2 * R) + 1.5
            s = kernel.s
            return (2 * R) ** (-s) * 2 / ((1 - s) * (2 - s)) / s
        if kernel.is_coulomb:
            return float(kernel.g(R)) + R ** (2 - self.d) / (self.d + 2)
        raise UnsupportedError(f"No closed-form self energy of a ball for {kernel}")

    def quadrature(self) -> Quadrature:
        n = self.order
        R = self._radius
        t, w = np.polynomial.legendre.leggauss(n)
        r = R * (t + 1) / 2
        wr = R * w / 2
        if self.d == 1:
            return self._center + R * t[:, None], w / 2
        if self.d == 2:
            phi = 2 * math.pi * np.arange(2 * n) / (2 * n)
            rr, pp = np.meshgrid(r, phi, indexing="ij")
            nodes = np.stack([rr * np.cos(pp), rr * np.sin(pp)], axis=-1).reshape(-1, 2)
            weights = np.outer(wr * r, np.full(2 * n, 2 * math.pi / (2 * n)))
            return nodes + self._center, (weights * self.level).ravel()
        if self.d == 3:
            ct, cw = np.polynomial.legendre.leggauss(n)
            phi = 2 * math.pi * np.arange(2 * n) / (2 * n)
            rr, cc, pp = np.meshgrid(r, ct, phi, indexing="ij")
            st = np.sqrt(1 - cc**2)
            nodes = np.stack(
                [rr * st * np.cos(pp), rr * st * np.sin(pp), rr * cc], axis=-1
            ).reshape(-1, 3)
            weights = (
                (wr * r**2)[:, None, None]
                * cw[None, :, None]
                * np.full(2 * n, 2 * math.pi / (2 * n))[None, None, :]
            )
            return nodes + self._center, (weights * self.level).ravel()
        raise UnsupportedError(f"Ball quadrature implemented for d <= 3, not {self.d}")

    def ball_mass(self, center: Sequence[float], radius: float) -> float:
        R = self._radius
        dist = float(np.linalg.norm(np.asarray(center, float) - self._center))
        if radius <= 0:
            return 0.0
        if dist + radius <= R:
            return self.level * sphere_area(self.d) * radius**self.d / self.d
        if dist + R <= radius:
            return 1.0
        if dist >= R + radius:
            return 0.0
        if self.d == 1:
            lo, hi = max(dist - radius, -R), min(dist + radius, R)
            return (hi - lo) * self.level
        if self.d == 2:
            cos_a = (dist**2 + radius**2 - R**2) / (2 * dist * radius)
            a = radius**2 * math.acos(cos_a)
            b = R**2 * math.acos((dist**2 + R**2 - radius**2) / (2 * dist * R))
            c = 0.5 * math.sqrt(
                (-dist + radius + R)
                * (dist + radius - R)
                * (dist - radius + R)
                * (dist + radius + R)
            )
            return (a + b - c) * self.level
        if self.d == 3:
            lens = (
                math.pi
                * (R + radius - dist) ** 2
                * (dist**2 + 2 * dist * (R + radius) - 3 * (R - radius) ** 2)
                / (12 * dist)
            )
            return lens * self.level
        raise UnsupportedError(f"Ball mass implemented for d <= 3, not {self.d}")

    def dilate(self, t: float) -> "UniformBall":
        return UniformBall(self.d, self._radius * t, self._center * t, self.order)

    def translate(self, shift: Sequence[float]) -> "UniformBall":
        return UniformBall(
            self.d, self._radius, self._center + np.asarray(shift, float), self.order
        )

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        direction = rng.standard_normal((n, self.d))
        direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
        r = self._radius * rng.random(n) ** (1.0 / self.d)
        return self._center + r[:, None] * direction


class Semicircle(AnalyticDensity):
    """Semicircle density (2/(pi R^2)) sqrt(R^2 - (x - c)^2) on [c - R, c + R]"""

    d = 1

    def __init__(self, radius: float = 2.0, center: float = 0.0, order: int = 64):
        if radius <= 0:
            raise ValueError(f"Radius must be positive, got {radius}")
        self._radius = float(radius)
        self._center = np.array([float(center)])
        self.order = order

    def values(self, x: np.ndarray) -> np.ndarray:
        y, _ = self._offsets(x)
        R = self._radius
        return 2 / (math.pi * R**2) * np.sqrt(np.clip(R**2 - y[:, 0] ** 2, 0, None))

    def mass(self) -> float:
        return 1.0

    def sup(self) -> float:
        return 2 / (math.pi * self._radius)

    def entropy(self) -> float:
        return -math.log(math.pi * self._radius) + 0.5

    def cdf(self, x: np.ndarray) -> np.ndarray:
        y, _ = self._offsets(x)
        u = np.clip(y[:, 0] / self._radius, -1, 1)
        return 0.5 + (u * np.sqrt(1 - u**2) + np.arcsin(u)) / math.pi

    def potential(self, kernel: RieszKernel, x: np.ndarray) -> np.ndarray:
        if not (kernel.d == 1 and kernel.s == 0):
            raise UnsupportedError(f"No closed-form semicircle potential for {kernel}")
        y, a = self._offsets(x)
        R = self._radius
        u = 2 * a / R
        shift = -math.log(R / 2)
        inside = -(u**2) / 4 + 0.5
        root = np.sqrt(np.clip(u**2 - 4, 0, None))
        with np.errstate(divide="ignore", invalid="ignore"):
            outside = -(u**2) / 4 + 0.5 + u * root / 4 - np.log((u + root) / 2)
        return np.where(u <= 2, inside, outside) + shift

    def self_energy(self, kernel: RieszKernel) -> float:
        if not (kernel.d == 1 and kernel.s == 0):
            raise UnsupportedError(f"No closed-form semicircle energy for {kernel}")
        return 0.25 - math.log(self._radius / 2)

    def quadrature(self) -> Quadrature:
        # Gauss-Chebyshev of the second kind, exact for polynomials of degree 2n-1
        n = self.order
        angles = np.arange(1, n + 1) * math.pi / (n + 1)
        nodes = self._center + self._radius * np.cos(angles)[:, None]
        weights = 2 / (n + 1) * np.sin(angles) ** 2
        return nodes, weights

    def ball_mass(self, center: Sequence[float], radius: float) -> float:
        c = float(np.asarray(center, float).ravel()[0])
        ends = self.cdf(np.array([[c - radius], [c + radius]]))
        return float(ends[1] - ends[0])

    def dilate(self, t: float) -> "Semicircle":
        return Semicircle(self._radius * t, float(self._center[0]) * t, self.order)

    def translate(self, shift: Sequence[float]) -> "Semicircle":
        offset = float(np.asarray(shift, float).ravel()[0])
        return Semicircle(self._radius, float(self._center[0]) + offset, self.order)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        b = rng.beta(1.5, 1.5, size=n)
        return self._center + self._radius * (2 * b - 1)[:, None]


class GriddedDensity(Density):
    """Piecewise-constant density on a cell-centred uniform grid.

    Potentials use product integration: the kernel is integrated exactly over
    each cell, which removes the singularity of the cell holding x.
    """

    def __init__(self, lower: Sequence[float], spacing: float, values: np.ndarray):
        self.values_grid = np.asarray(values, dtype=float)
        self.d = self.values_grid.ndim
        self.lower = np.asarray(lower, dtype=float).reshape(self.d)
        self.spacing = float(spacing)
        if self.d not in (1, 2):
            raise UnsupportedError("Gridded densities are implemented for d in (1, 2)")
        if np.any(self.values_grid < 0):
            raise ValueError("Density values must be nonnegative")
        self._kernel_cache: Dict[RieszKernel, np.ndarray] = {}

    @classmethod
    def from_function(
        cls,
        f: Callable[[np.ndarray], np.ndarray],
        lower: Sequence[float],
        upper: Sequence[float],
        n: int,
    ) -> "GriddedDensity":
        "Sample f at the cell centres of an n^d grid on the box and normalize"
        lower_arr = np.asarray(lower, float)
        spacing = float(np.max(np.asarray(upper, float) - lower_arr)) / n
        grid = cls(lower_arr, spacing, np.zeros((n,) * len(lower_arr)))
        values = np.asarray(f(grid.nodes()), dtype=float).reshape(grid.shape)
        return grid.with_values(values / (values.sum() * spacing**grid.d))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values_grid.shape

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.d

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.spacing * np.asarray(self.shape)

    @property
    def center(self) -> np.ndarray:
        return (self.lower + self.upper) / 2

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower)) / 2

    def with_values(self, values: np.ndarray) -> "GriddedDensity":
        out = GriddedDensity(self.lower, self.spacing, values)
        out._kernel_cache = self._kernel_cache
        return out

    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(
            self.lower[i] + self.spacing * (np.arange(n) + 0.5)
            for i, n in enumerate(self.shape)
        )

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def values(self, x: np.ndarray) -> np.ndarray:
        points = as_points(x, self.d)
        index = np.floor((points - self.lower) / self.spacing).astype(int)
        inside = np.all((index >= 0) & (index < np.asarray(self.shape)), axis=-1)
        out = np.zeros(len(points))
        if np.any(inside):
            out[inside] = self.values_grid[tuple(index[inside].T)]
        return out

    def mass(self) -> float:
        return float(self.values_grid.sum() * self.cell_volume)

    def sup(self) -> float:
        return float(self.values_grid.max())

    def entropy(self) -> float:
        v = self.values_grid
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(v > 0, v * np.log(v), 0.0)
        return float(terms.sum() * self.cell_volume)

    def quadrature(self) -> Quadrature:
        weights = self.values_grid.ravel() * self.cell_volume
        keep = weights > 0
        return self.nodes()[keep], weights[keep]

    def _convolution_kernel(self, kernel: RieszKernel) -> np.ndarray:
        if kernel not in self._kernel_cache:
            offsets = [self.spacing * np.arange(-(n - 1), n) for n in self.shape]
            mesh = np.stack(np.meshgrid(*offsets, indexing="ij"), axis=-1)
            self._kernel_cache[kernel] = cell_kernel(kernel, mesh, self.spacing)
        return self._kernel_cache[kernel]

    def grid_potential(
        self, kernel: RieszKernel, values: Optional[np.ndarray] = None
    ) -> np.ndarray:
        "h^mu at every cell centre, by FFT convolution"
        v = self.values_grid if values is None else values
        full = signal.fftconvolve(v, self._convolution_kernel(kernel), mode="full")
        window = tuple(slice(n - 1, 2 * n - 1) for n in self.shape)
        return full[window]

    def potential(
        self, kernel: RieszKernel, x: np.ndarray, chunk: int = 256
    ) -> np.ndarray:
        points = as_points(x, self.d)
        nodes, weights = self.quadrature()
        dens = weights / self.cell_volume
        out = np.empty(len(points))
        for start in range(0, len(points), chunk):
            block = points[start : start + chunk]
            z = block[:, None, :] - nodes[None, :, :]
            out[start : start + chunk] = cell_kernel(kernel, z, self.spacing) @ dens
        return out

    def self_energy(self, kernel: RieszKernel) -> float:
        h = self.grid_potential(kernel)
        return float(np.sum(h * self.values_grid) * self.cell_volume)

    def ball_mass(self, center: Sequence[float], radius: float) -> float:
        nodes, weights = self.quadrature()
        dist = np.linalg.norm(nodes - np.asarray(center, float), axis=-1)
        return float(weights[dist <= radius].sum())

    def dilate(self, t: float) -> "GriddedDensity":
        values = self.values_grid / t**self.d
        return GriddedDensity(self.lower * t, self.spacing * t, values)

    def translate(self, shift: Sequence[float]) -> "GriddedDensity":
        return GriddedDensity(
            self.lower + np.asarray(shift, float), self.spacing, self.values_grid
        )

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        nodes, weights = self.quadrature()
        cells = rng.choice(len(nodes), size=n, p=weights / weights.sum())
        jitter = (rng.random((n, self.d)) - 0.5) * self.spacing
        return nodes[cells] + jitter

    def describe(self) -> Dict[str, Any]:
        return {
            "family": "GriddedDensity",
            "d": self.d,
            "lower": self.lower.tolist(),
            "spacing": self.spacing,
            "shape": list(self.shape),
        }

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write the header lines d, lower, upper, spacing, then row-major values"""
        with open(path, "w") as out:
            out.write(f"# d,{self.d}\n")
            for key, row in (("lower", self.lower), ("upper", self.upper)):
                out.write(f"# {key}," + ",".join(FLOAT_FORMAT % v for v in row) + "\n")
            out.write(f"# spacing,{FLOAT_FORMAT % self.spacing}\n")
            out.write("# shape," + ",".join(str(n) for n in self.shape) + "\n")
            frame = pd.DataFrame(self.values_grid.reshape(self.shape[0], -1))
            frame.to_csv(out, header=False, index=False, float_format=FLOAT_FORMAT)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "GriddedDensity":
        header: Dict[str, Sequence[str]] = {}
        with open(path) as src:
            for line in src:
                if not line.startswith("#"):
                    break
                key, *fields = line[1:].strip().split(",")
                header[key] = fields
        frame = pd.read_csv(path, comment="#", header=None)
        shape = tuple(int(n) for n in header["shape"])
        values = frame.to_numpy(dtype=float).reshape(shape)
        lower = [float(v) for v in header["lower"]]
        return cls(lower, float(header["spacing"][0]), values)
