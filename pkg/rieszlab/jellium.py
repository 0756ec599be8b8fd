"""Periodic (jellium) renormalized energies.

For a lattice Lambda with covolume |T| the periodic kernel K solves
(-Delta)^{(d-s)/2} K = kappa (delta - 1/|T|) on the torus R^d / Lambda with
zero mean, so that K - g is smooth near the origin. The Green function of the
torus is G = K / c_{d,s}, and for N points a_i on a torus of volume N

    W = (1/2N) sum_{i != j} K(a_i - a_j) + 1/2 lim_{x -> 0} (K(x) - g(x)).

K is evaluated by Ewald summation of the heat-kernel representation: the
small-time part is a real-space sum of incomplete gamma functions, the
large-time part a Fourier sum over the dual lattice.
"""
import json
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Tuple

import mpmath
import numpy as np
import pandas as pd
from scipy import special

from .errors import (
    EwaldTruncationError,
    LineSearchError,
    SingularEvaluationError,
    UnsupportedError,
)
from .kernels import RieszKernel, fractional_constant, riesz_constant, upper_gamma
from .reports import ScanReport
from .util import as_points, integer_shell, integer_shells, make_rng

logger = logging.getLogger(__name__)

#: shells whose contribution stays below this are considered converged
EWALD_TOL = 1e-12


@dataclass(eq=False)
class Lattice:
    "Bravais lattice spanned by the rows of ``basis``"

    basis: np.ndarray

    def __post_init__(self) -> None:
        self.basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        n, d = self.basis.shape
        if n != d:
            raise ValueError(f"Basis must be square, got shape {self.basis.shape}")
        if abs(np.linalg.det(self.basis)) < 1e-300:
            raise ValueError("Lattice basis is singular")

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def covolume(self) -> float:
        return float(abs(np.linalg.det(self.basis)))

    @cached_property
    def dual(self) -> np.ndarray:
        "Rows k with k . v integer for every lattice vector v"
        return np.linalg.inv(self.basis).T

    @cached_property
    def _inverse(self) -> np.ndarray:
        return np.linalg.inv(self.basis)

    def __eq__(self, other: Any) -> bool:
        return isinstance(other, Lattice) and np.array_equal(self.basis, other.basis)

    def __repr__(self) -> str:
        return f"Lattice({self.basis.tolist()})"

    @classmethod
    def cubic(cls, d: int, covolume: float = 1.0) -> "Lattice":
        return cls(covolume ** (1.0 / d) * np.eye(d))

    @classmethod
    def from_tau(cls, tau: complex, covolume: float = 1.0) -> "Lattice":
        "2D lattice spanned by 1 and tau, rescaled to the given covolume"
        tau = complex(tau)
        if tau.imag <= 0:
            raise ValueError(f"tau must lie in the upper half plane, got {tau}")
        scale = math.sqrt(covolume / tau.imag)
        return cls(scale * np.array([[1.0, 0.0], [tau.real, tau.imag]]))

    @classmethod
    def triangular(cls, covolume: float = 1.0) -> "Lattice":
        return cls.from_tau(complex(0.5, math.sqrt(3) / 2), covolume)

    @property
    def tau(self) -> complex:
        "Modular parameter v_2 / v_1 for planar lattices, with Im tau > 0"
        if self.d != 2:
            raise UnsupportedError("tau is defined for planar lattices")
        z1 = complex(*self.basis[0])
        z2 = complex(*self.basis[1])
        tau = z2 / z1
        return tau if tau.imag > 0 else tau.conjugate()

    def scaled(self, t: float) -> "Lattice":
        return Lattice(t * self.basis)

    def vectors(self, n: np.ndarray) -> np.ndarray:
        "Lattice vectors with integer coordinates n"
        return np.asarray(n, dtype=float) @ self.basis

    def fractional(self, x: np.ndarray) -> np.ndarray:
        return as_points(x, self.d) @ self._inverse

    def wrap(self, x: np.ndarray) -> np.ndarray:
        "Representatives in the fundamental cell, fractional coordinates in [0, 1)"
        f = self.fractional(x)
        return (f - np.floor(f)) @ self.basis

    def nearest_image(self, x: np.ndarray) -> np.ndarray:
        "Representatives with fractional coordinates in [-1/2, 1/2)"
        f = self.fractional(x)
        return (f - np.rint(f)) @ self.basis

    def to_json(self) -> str:
        return json.dumps({"basis": self.basis.tolist(), "covolume": self.covolume})

    @classmethod
    def from_json(cls, text: str) -> "Lattice":
        data = json.loads(text)
        return cls(np.array(data["basis"], dtype=float))


@dataclass
class TorusConfig:
    "N points on the torus R^d / Lambda, where Lambda has covolume N"

    lattice: Lattice
    points: np.ndarray

    def __post_init__(self) -> None:
        self.points = self.lattice.wrap(as_points(self.points, self.lattice.d))
        if abs(self.lattice.covolume - self.N) > 1e-9 * max(1, self.N):
            raise ValueError(
                f"{self.N} points need a torus of volume {self.N}, "
                f"not {self.lattice.covolume:.12g}"
            )

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.lattice.d

    @classmethod
    def equally_spaced(cls, N: int, offset: float = 0.0) -> "TorusConfig":
        "N points with unit spacing on the circle of length N"
        points = offset + np.arange(N, dtype=float)
        return cls(Lattice(np.array([[float(N)]])), points[:, None])

    @classmethod
    def random(
        cls, lattice: Lattice, seed: int = 0, stream: int = 0
    ) -> "TorusConfig":
        N = int(round(lattice.covolume))
        f = make_rng(seed, stream).random((N, lattice.d))
        return cls(lattice, f @ lattice.basis)

    def translate(self, shift: np.ndarray) -> "TorusConfig":
        return TorusConfig(self.lattice, self.points + np.asarray(shift, float))


class PeriodicKernel(ABC):
    """Periodic kernel K with K - g smooth at the lattice points"""

    lattice: Lattice
    s: float

    @property
    def d(self) -> int:
        return self.lattice.d

    @property
    def kernel(self) -> RieszKernel:
        return RieszKernel(self.d, self.s)

    @abstractmethod
    def value(self, x: np.ndarray) -> np.ndarray:
        "K at points of shape (M, d); +inf at lattice points when s >= 0"

    @abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def limit(self) -> float:
        "lim_{x -> 0} K(x) - g(x)"


class LogChainKernel(PeriodicKernel):
    "Closed form K(x) = -log|2 sin(pi x / L)| for the log gas on a circle"

    def __init__(self, length: float):
        if length <= 0:
            raise ValueError(f"Circle length must be positive, got {length}")
        self.lattice = Lattice(np.array([[float(length)]]))
        self.length = float(length)
        self.s = 0.0

    def _phase(self, x: np.ndarray) -> np.ndarray:
        f = as_points(x, 1)[:, 0] / self.length
        return math.pi * (f - np.rint(f))

    def value(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return -np.log(np.abs(2 * np.sin(self._phase(x))))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        phase = self._phase(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -(math.pi / self.length) * np.cos(phase) / np.sin(phase)
        return out[:, None]

    def limit(self) -> float:
        return -math.log(2 * math.pi / self.length)


class EwaldKernel(PeriodicKernel):
    """Ewald evaluation of K for any supported (d, s).

    With a = (d - s)/2 and splitting time alpha (default L^2 / 4 pi with
    L = |T|^{1/d}), K / kappa is the sum of

    * real space: (4 pi)^{-d/2} (r^2/4)^{-s/2} Gamma(s/2, r^2/(4 alpha)) / Gamma(a)
      over the images x - v;
    * Fourier: (1/|T|) (4 pi^2 |k|^2)^{-a} Q(a, 4 pi^2 |k|^2 alpha) cos(2 pi k.x)
      over nonzero dual vectors;
    * background: -alpha^a / (a Gamma(a) |T|).

    Shells of lattice vectors are added until two consecutive shells change
    the result by less than ``tol``.
    """

    def __init__(
        self,
        lattice: Lattice,
        s: float,
        alpha: Optional[float] = None,
        tol: float = EWALD_TOL,
        max_shells: int = 64,
    ):
        RieszKernel(lattice.d, s)
        self.lattice = lattice
        self.s = float(s)
        L = lattice.covolume ** (1.0 / lattice.d)
        self.alpha = L**2 / (4 * math.pi) if alpha is None else float(alpha)
        if self.alpha <= 0:
            raise ValueError(f"Ewald splitting must be positive, got {self.alpha}")
        self.tol = tol
        self.max_shells = max_shells
        d = lattice.d
        self.a = (d - self.s) / 2
        self.kappa = fractional_constant(d, self.s)
        self._real_scale = self.kappa * (4 * math.pi) ** (-d / 2) / math.gamma(self.a)
        self._limit: Optional[float] = None

    def __repr__(self) -> str:
        return f"EwaldKernel({self.lattice!r}, s={self.s:g}, alpha={self.alpha:g})"

    def _real_terms(self, r2: np.ndarray) -> np.ndarray:
        z = r2 / (4 * self.alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.s == 0:
                out = special.exp1(z)
            else:
                out = np.power(r2 / 4, -self.s / 2) * upper_gamma(self.s / 2, z)
        return self._real_scale * np.asarray(out)

    def _real_gradient_terms(self, y: np.ndarray, r2: np.ndarray) -> np.ndarray:
        b = self.s / 2 + 1
        z = r2 / (4 * self.alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.power(r2 / 4, -b) * special.gammaincc(b, z) * special.gamma(b)
        return -self._real_scale * 0.5 * radial[..., None] * y

    def _fourier_weights(self, k: np.ndarray) -> np.ndarray:
        lam = 4 * math.pi**2 * np.sum(k**2, axis=-1)
        weight = np.power(lam, -self.a) * special.gammaincc(self.a, lam * self.alpha)
        return self.kappa * weight / self.lattice.covolume

    @property
    def background(self) -> float:
        a = self.a
        return -self.kappa * self.alpha**a / (a * math.gamma(a) * self.lattice.covolume)

    def _sum_shells(
        self,
        term: Callable[[int, np.ndarray], np.ndarray],
        shape: Tuple[int, ...],
        label: str,
    ) -> np.ndarray:
        total = np.zeros(shape)
        quiet = 0
        m = 0
        while m <= self.max_shells:
            contribution = term(m, integer_shell(self.d, m))
            total = total + contribution
            size = float(np.max(np.abs(contribution))) if contribution.size else 0.0
            quiet = quiet + 1 if m > 0 and size < self.tol else 0
            if quiet >= 2:
                logger.debug(f"{label} sum converged after {m} shells")
                return total
            m += 1
        suggested = {"real": 2 * self.max_shells, "fourier": 2 * self.max_shells}
        raise EwaldTruncationError(
            f"{label} sum of {self} not converged after {self.max_shells} shells",
            suggested,
        )

    def _value(self, y: np.ndarray, self_term: bool) -> np.ndarray:
        M = len(y)

        def real(m: int, shell: np.ndarray) -> np.ndarray:
            if m == 0 and not self_term:
                return np.zeros(M)
            v = self.lattice.vectors(shell)
            r2 = np.sum((y[:, None, :] - v[None]) ** 2, axis=-1)
            return self._real_terms(r2).sum(axis=1)

        def fourier(m: int, shell: np.ndarray) -> np.ndarray:
            if m == 0:
                return np.zeros(M)
            k = shell @ self.lattice.dual
            phase = 2 * math.pi * y @ k.T
            return np.cos(phase) @ self._fourier_weights(k)

        return (
            self._sum_shells(real, (M,), "real-space")
            + self._sum_shells(fourier, (M,), "Fourier")
            + self.background
        )

    def value(self, x: np.ndarray) -> np.ndarray:
        y = self.lattice.nearest_image(x)
        at_lattice = np.all(np.abs(self.lattice.fractional(y)) < 1e-15, axis=-1)
        values = self._value(y, self_term=True)
        # K(0) = lim (K - g) when g is finite at the origin
        at_zero = math.inf if self.s >= 0 else self.limit()
        return np.where(at_lattice, at_zero, values)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        y = self.lattice.nearest_image(x)
        M = len(y)

        def real(m: int, shell: np.ndarray) -> np.ndarray:
            v = self.lattice.vectors(shell)
            diff = y[:, None, :] - v[None]
            r2 = np.sum(diff**2, axis=-1)
            terms = self._real_gradient_terms(diff, r2)
            return np.where(r2[..., None] > 0, terms, 0.0).sum(axis=1)

        def fourier(m: int, shell: np.ndarray) -> np.ndarray:
            if m == 0:
                return np.zeros((M, self.d))
            k = shell @ self.lattice.dual
            phase = 2 * math.pi * y @ k.T
            weights = self._fourier_weights(k)
            return -2 * math.pi * (np.sin(phase) * weights) @ k

        shape = (M, self.d)
        return self._sum_shells(real, shape, "real-space") + self._sum_shells(
            fourier, shape, "Fourier"
        )

    def _self_limit(self) -> float:
        "lim_{r -> 0} of the v = 0 real-space term minus g(r)"
        if self.s == 0:
            return 0.5 * (math.log(4 * self.alpha) - np.euler_gamma)
        s = self.s
        return -self._real_scale * self.alpha ** (-s / 2) * (2 / s)

    def limit(self) -> float:
        if self._limit is None:
            regular = self._value(np.zeros((1, self.d)), self_term=False)[0]
            self._limit = float(regular) + self._self_limit()
        return self._limit


def periodic_kernel(
    lattice: Lattice, s: float, alpha: Optional[float] = None
) -> PeriodicKernel:
    "Closed form for the log gas on a circle, Ewald summation otherwise"
    if lattice.d == 1 and s == 0 and alpha is None:
        return LogChainKernel(float(lattice.basis[0, 0]))
    return EwaldKernel(lattice, s, alpha)


def green_1d_log(x: Any, N: float) -> Any:
    "G(x) = -(1/2 pi) log|2 sin(pi x / N)| on the circle of length N"
    f = np.asarray(x, dtype=float) / N
    f = f - np.rint(f)
    if np.any(f == 0):
        raise SingularEvaluationError(f"Green function evaluated at a multiple of {N}")
    out = -np.log(np.abs(2 * np.sin(math.pi * f))) / (2 * math.pi)
    return float(out) if out.ndim == 0 else out


def green_periodic(
    lattice: Lattice, s: float, x: np.ndarray, alpha: Optional[float] = None
) -> np.ndarray:
    """Torus Green function G = K / c_{d,s} at the points x"""
    kernel = EwaldKernel(lattice, s, alpha)
    values = kernel.value(x)
    if np.any(np.isinf(values)):
        raise SingularEvaluationError("Green function evaluated at a lattice point")
    return values / riesz_constant(lattice.d, s)


def madelung(lattice: Lattice, s: float, alpha: Optional[float] = None) -> float:
    "lim_{x -> 0} G(x) - g(x) / c_{d,s}"
    return periodic_kernel(lattice, s, alpha).limit() / riesz_constant(lattice.d, s)


def _pair_offsets(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    N = len(points)
    i, j = np.nonzero(~np.eye(N, dtype=bool))
    return i, j, points[i] - points[j]


def W_periodic(
    config: TorusConfig,
    s: float,
    alpha: Optional[float] = None,
    kernel: Optional[PeriodicKernel] = None,
) -> float:
    """W = (1/2N) sum_{i != j} K(a_i - a_j) + 1/2 lim (K - g)

    +inf on a multiple point.
    """
    kernel = periodic_kernel(config.lattice, s, alpha) if kernel is None else kernel
    N = config.N
    total = 0.5 * kernel.limit()
    if N > 1:
        _, _, offsets = _pair_offsets(config.points)
        pairs = kernel.value(offsets)
        if np.any(np.isinf(pairs)):
            return math.inf
        total += float(pairs.sum()) / (2 * N)
    return total


def W_gradient(
    config: TorusConfig,
    s: float,
    alpha: Optional[float] = None,
    kernel: Optional[PeriodicKernel] = None,
) -> np.ndarray:
    "dW/da_i = (1/N) sum_{j != i} grad K(a_i - a_j)"
    kernel = periodic_kernel(config.lattice, s, alpha) if kernel is None else kernel
    N = config.N
    grad = np.zeros((N, config.d))
    if N > 1:
        i, _, offsets = _pair_offsets(config.points)
        np.add.at(grad, i, kernel.gradient(offsets))
    return grad / N


def optimize_torus(
    config0: TorusConfig,
    s: float,
    tol: float = 1e-10,
    max_iter: int = 20000,
    alpha: Optional[float] = None,
) -> TorusConfig:
    """Steepest descent on W over the point positions, with Armijo backtracking.

    W never increases beyond roundoff; the iteration stops once the largest
    gradient component is below ``tol``.
    """
    kernel = periodic_kernel(config0.lattice, s, alpha)
    config = config0
    energy = W_periodic(config, s, kernel=kernel)
    if math.isinf(energy):
        raise ValueError("optimize_torus needs a start without multiple points")
    eta = 1.0
    for iteration in range(max_iter):
        grad = W_gradient(config, s, kernel=kernel)
        if np.abs(grad).max() < tol:
            break
        norm2 = float(np.sum(grad**2))
        slack = 4 * np.finfo(float).eps * max(1.0, abs(energy))
        while True:
            trial = TorusConfig(config.lattice, config.points - eta * grad)
            trial_energy = W_periodic(trial, s, kernel=kernel)
            if trial_energy <= energy - 1e-4 * eta * norm2 + slack:
                break
            eta /= 2
            if eta < 1e-16:
                raise LineSearchError(f"Backtracking failed at iteration {iteration}")
        config, energy = trial, trial_energy
        eta *= 2
        logger.debug(f"iteration {iteration}: W={energy:.15g}, |grad|={norm2**0.5:.3g}")
    else:
        raise LineSearchError(f"No critical point within {max_iter} iterations")
    logger.info(f"optimized W={energy:.12g} for N={config.N} after {iteration} steps")
    return config


def fundamental_domain_grid(
    n: int = 50, tau2_max: float = 2.0
) -> Tuple[np.ndarray, np.ndarray]:
    "Axes of the tau grid: tau_1 in [-1/2, 1/2] and tau_2 in [sqrt(3)/2, tau2_max]"
    return np.linspace(-0.5, 0.5, n), np.linspace(math.sqrt(3) / 2, tau2_max, n)


def lattice_scan_2d(
    s: float = 0.0, n: int = 50, tau2_max: float = 2.0
) -> ScanReport:
    """W of the unit-covolume lattices Lambda_tau over the fundamental domain.

    Only tau_1 >= 0 is evaluated; W(-conj tau) = W(tau) fills in the mirror
    half. Grid nodes with |tau| < 1 are skipped.
    """
    tau1, tau2 = fundamental_domain_grid(n, tau2_max)
    rows: List[Dict[str, float]] = []
    cache: Dict[Tuple[float, float], float] = {}
    for x in tau1:
        for y in tau2:
            if abs(complex(x, y)) < 1 - 1e-12:
                continue
            key = (round(abs(float(x)), 12), float(y))
            if key not in cache:
                lattice = Lattice.from_tau(complex(key[0], y))
                cache[key] = W_periodic(TorusConfig(lattice, np.zeros((1, 2))), s)
            rows.append({"tau1": float(x), "tau2": float(y), "W": cache[key]})
    table = pd.DataFrame(rows)
    # ties between tau and its mirror image resolve to tau_1 >= 0
    ties = table[table["W"] <= table["W"].min() + 1e-12]
    best = table.loc[ties["tau1"].idxmax()]
    tau = complex(best["tau1"], best["tau2"])
    h1, h2 = tau1[1] - tau1[0], tau2[1] - tau2[0]
    interval = (
        (max(-0.5, tau.real - h1), min(0.5, tau.real + h1)),
        (max(tau2[0], tau.imag - h2), min(tau2_max, tau.imag + h2)),
    )
    message = f"argmin tau={tau.real:.6f}+{tau.imag:.6f}i, W={best['W']:.12g}"
    logger.info(f"lattice scan over {len(table)} nodes: {message}")
    return ScanReport(message, tau, float(best["W"]), interval, table)


def eisenstein_green(x: np.ndarray, lattice: Lattice, R: int = 200) -> np.ndarray:
    """G for d = 2, s = 0 by direct Fourier summation over dual vectors in the
    box max |n_i| <= R, averaged with the box R + 1
    """
    if lattice.d != 2:
        raise UnsupportedError("The Eisenstein route is planar")
    y = as_points(x, 2)
    n = np.arange(-(R + 1), R + 2)
    grid = np.stack(np.meshgrid(n, n, indexing="ij"), axis=-1).reshape(-1, 2)
    box = np.abs(grid).max(axis=1)
    grid, box = grid[box > 0], box[box > 0]
    k = grid @ lattice.dual
    weights = 1 / (4 * math.pi**2 * np.sum(k**2, axis=-1) * lattice.covolume)
    terms = np.cos(2 * math.pi * y @ k.T) * weights
    inner = terms[:, box <= R].sum(axis=1)
    outer = inner + terms[:, box == R + 1].sum(axis=1)
    return 0.5 * (inner + outer)


def dedekind_eta(tau: complex) -> complex:
    "eta(tau) = q^{1/24} prod_{n >= 1} (1 - q^n) with q = exp(2 pi i tau)"
    t = mpmath.mpc(tau.real, tau.imag)
    q = mpmath.exp(2j * mpmath.pi * t)
    return complex(mpmath.exp(2j * mpmath.pi * t / 24) * mpmath.qp(q))


def kronecker_madelung(tau: complex) -> float:
    """Madelung constant of the unit-covolume lattice Lambda_tau for d = 2,
    s = 0, from the first Kronecker limit formula
    """
    eta = dedekind_eta(complex(tau))
    return -math.log(2 * math.pi * math.sqrt(complex(tau).imag) * abs(eta) ** 2) / (
        2 * math.pi
    )


def epstein_zeta(lattice: Lattice, p: float, tol: float = EWALD_TOL) -> float:
    """Z(p) = sum_{v != 0} |v|^{-p} for p > d, by the incomplete gamma split of
    the theta function of the lattice rescaled to unit covolume
    """
    d = lattice.d
    if p <= d:
        raise ValueError(f"The Epstein zeta sum needs p > {d}, got {p}")
    t = lattice.covolume ** (-1.0 / d)
    unit = lattice.scaled(t)
    total = 2 / (p - d) - 2 / p
    for label, rows in (("real", unit.basis), ("dual", unit.dual)):
        order = p / 2 if label == "real" else (d - p) / 2
        partial, quiet = 0.0, 0
        for m, shell in integer_shells(d):
            if m == 0:
                continue
            v2 = np.sum((shell @ rows) ** 2, axis=-1)
            z = math.pi * v2
            contribution = float(np.sum(np.power(z, -order) * upper_gamma(order, z)))
            partial += contribution
            quiet = quiet + 1 if abs(contribution) < tol else 0
            if quiet >= 2:
                break
        total += partial
    return total * math.pi ** (p / 2) / math.gamma(p / 2) * t**p
