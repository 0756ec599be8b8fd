"""Hamiltonian, modulated energy and transport derivatives.

F_N(X, mu) is the pair energy of sum_i delta_{x_i} - N mu with the diagonal
removed. Transport quantities A_n are the t-derivatives of F_N along the
simultaneous push-forward of the points and of mu by x + t v(x); the reference
measure enters them through its quadrature nodes, which carry the charges
-N w_k.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .density import Density
from .equilibrium import EquilibriumResult, energy_functional, zeta
from .kernels import RieszKernel
from .potentials import Potential
from .thermal import ThermalResult
from .util import FLOAT_FORMAT

logger = logging.getLogger(__name__)

VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass
class Configuration:
    "N points in R^d, stored as an (N, d) array"

    points: np.ndarray
    #: provenance written into checkpoints
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.points = np.array(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if not np.all(np.isfinite(self.points)):
            raise ValueError("Configuration coordinates must be finite")

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def min_gap(self) -> float:
        if self.N < 2:
            return math.inf
        return float(pdist(self.points).min())

    @property
    def is_simple(self) -> bool:
        return self.min_gap() > 0

    def translate(self, shift: Sequence[float]) -> "Configuration":
        shifted = self.points + np.asarray(shift, float)
        return Configuration(shifted, dict(self.metadata))

    def dilate(self, t: float) -> "Configuration":
        return Configuration(self.points * t, dict(self.metadata))

    def to_csv(self, path: Union[str, Path]) -> None:
        "One point per row after '# key,value' header lines (dim, N, step, beta, seed)"
        header = {"dim": self.d, "N": self.N}
        for key in ("step", "beta", "seed"):
            header[key] = self.metadata.get(key, "")
        with open(path, "w") as out:
            for key, value in header.items():
                out.write(f"# {key},{value}\n")
            frame = pd.DataFrame(self.points, columns=[f"x{i}" for i in range(self.d)])
            frame.to_csv(out, index=False, float_format=FLOAT_FORMAT)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "Configuration":
        metadata: Dict[str, Any] = {}
        with open(path) as src:
            for line in src:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].strip().partition(",")
                metadata[key] = value
        frame = pd.read_csv(path, comment="#")
        return cls(frame.to_numpy(dtype=float), metadata)


ConfigLike = Union[Configuration, np.ndarray]


def _points(X: ConfigLike, d: Optional[int] = None) -> np.ndarray:
    if isinstance(X, Configuration):
        return X.points
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None] if d in (None, 1) else arr[None, :]
    return arr


@dataclass
class TransportField:
    """Lipschitz vector field v with Jacobian, compactly supported in a box"""

    v: VectorField
    jacobian: Callable[[np.ndarray], np.ndarray]
    #: sup |Dv|
    lipschitz: float
    #: (lower, upper) corners of a box containing the support; None if unbounded
    support: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.v(x)

    def acceleration(self, x: np.ndarray) -> np.ndarray:
        "(Dv) v, the second time derivative of the flow"
        return np.einsum("mij,mj->mi", self.jacobian(x), self.v(x))


def constant_field(vector: Sequence[float]) -> TransportField:
    w = np.asarray(vector, dtype=float)
    d = len(w)
    return TransportField(
        lambda x: np.broadcast_to(w, np.shape(x)).copy(),
        lambda x: np.zeros((len(x), d, d)),
        0.0,
    )


def affine_field(
    matrix: Sequence[Sequence[float]], offset: Sequence[float]
) -> TransportField:
    "v(x) = A x + b"
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    b = np.asarray(offset, dtype=float)
    return TransportField(
        lambda x: np.asarray(x) @ A.T + b,
        lambda x: np.broadcast_to(A, (len(x),) + A.shape).copy(),
        float(np.linalg.norm(A, 2)),
    )


def bump_profile(q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    "phi(q) = exp(1 - 1/(1 - q)) on q < 1 and its derivative"
    inside = q < 1
    safe = np.where(inside, q, 0.0)
    phi = np.where(inside, np.exp(1 - 1 / (1 - safe)), 0.0)
    dphi = np.where(inside, -phi / (1 - safe) ** 2, 0.0)
    return phi, dphi


def bump_field(
    center: Sequence[float], radius: float, direction: Sequence[float]
) -> TransportField:
    """v(x) = direction * phi(|x - center|^2 / radius^2), smooth with compact support"""
    c = np.asarray(center, dtype=float)
    w = np.asarray(direction, dtype=float)

    def v(x: np.ndarray) -> np.ndarray:
        q = np.sum((np.asarray(x) - c) ** 2, axis=-1) / radius**2
        return bump_profile(q)[0][:, None] * w

    def jacobian(x: np.ndarray) -> np.ndarray:
        y = np.asarray(x) - c
        q = np.sum(y**2, axis=-1) / radius**2
        grad = bump_profile(q)[1][:, None] * 2 * y / radius**2
        return w[None, :, None] * grad[:, None, :]

    q = np.linspace(0, 1, 10001)[:-1]
    slope = np.abs(bump_profile(q)[1]) * 2 * np.sqrt(q) / radius
    bound = float(np.linalg.norm(w) * slope.max())
    return TransportField(v, jacobian, bound, (c - radius, c + radius))


def flow(
    field_: TransportField, X: ConfigLike, t: float, steps: int = 16
) -> np.ndarray:
    "Phi_t(X) for dx/dt = v(x) by the classical Runge-Kutta method"
    x = np.array(_points(X), dtype=float)
    h = t / steps
    for _ in range(steps):
        k1 = field_.v(x)
        k2 = field_.v(x + 0.5 * h * k1)
        k3 = field_.v(x + 0.5 * h * k2)
        k4 = field_.v(x + h * k3)
        x = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return x


def _pair_energy(points: np.ndarray, kernel: RieszKernel) -> float:
    "sum over i < j of g(x_i - x_j); +inf on a coincidence when s >= 0"
    if len(points) < 2:
        return 0.0
    with np.errstate(divide="ignore"):
        return float(np.sum(kernel.g(pdist(points))))


def hamiltonian(X: ConfigLike, V: Potential, kernel: RieszKernel) -> float:
    "H_N = 1/2 sum_{i != j} g(x_i - x_j) + N sum_i V(x_i)"
    points = _points(X, kernel.d)
    N = len(points)
    return _pair_energy(points, kernel) + N * float(np.sum(V.value(points)))


def modulated_energy(X: ConfigLike, mu: Density, kernel: RieszKernel) -> float:
    """F_N(X, mu) = 1/2 sum_{i != j} g - N sum_i h^mu(x_i) + N^2/2 int int g dmu dmu"""
    points = _points(X, kernel.d)
    N = len(points)
    pairs = _pair_energy(points, kernel)
    if math.isinf(pairs):
        return pairs
    h = mu.potential(kernel, points)
    return pairs - N * float(np.sum(h)) + 0.5 * N**2 * mu.self_energy(kernel)


def nn_radii(
    X: ConfigLike, lam: Optional[float] = None, mu: Optional[Density] = None
) -> np.ndarray:
    """r_i = 1/4 min(min_{j != i} |x_i - x_j|, lambda)

    lambda defaults to (N ||mu||_inf)^{-1/d}.
    """
    points = _points(X)
    N, d = points.shape
    if lam is None:
        if mu is None:
            raise ValueError("nn_radii needs either lam or a reference density")
        lam = (N * mu.sup()) ** (-1.0 / d)
    if N < 2:
        return np.full(N, lam / 4)
    dist, _ = cKDTree(points).query(points, k=2)
    return np.minimum(dist[:, 1], lam) / 4


def truncated_self_energy(X: ConfigLike, kernel: RieszKernel, lam: float) -> float:
    "sum_i g(r_i), the nearest-neighbour control quantity"
    r = nn_radii(X, lam)
    with np.errstate(divide="ignore"):
        return float(np.sum(kernel.g(r)))


def splitting_residual(
    X: ConfigLike,
    result: EquilibriumResult,
    V: Optional[Potential] = None,
    kernel: Optional[RieszKernel] = None,
) -> float:
    "|H_N - (N^2 E(mu_V) + N sum_i zeta(x_i) + F_N(X, mu_V))|"
    V = result.potential if V is None else V
    kernel = result.kernel if kernel is None else kernel
    points = _points(X, kernel.d)
    N = len(points)
    H = hamiltonian(points, V, kernel)
    energy = energy_functional(result.density, V, kernel)
    confinement = float(np.sum(zeta(points, result, V)))
    F = modulated_energy(points, result.density, kernel)
    return abs(H - (N**2 * energy + N * confinement + F))


def thermal_splitting_residual(X: ConfigLike, thermal: ThermalResult) -> float:
    "|H_N - (N^2 E_theta(mu_theta) - (N/theta) sum log mu_theta(x_i) + F_N)|"
    kernel = thermal.kernel
    points = _points(X, kernel.d)
    N = len(points)
    H = hamiltonian(points, thermal.potential, kernel)
    entropy = float(np.sum(thermal.log_density(points)))
    F = modulated_energy(points, thermal.density, kernel)
    return abs(H - (N**2 * thermal.energy - N / thermal.theta * entropy + F))


def _log_correction(N: int, d: int, kernel: RieszKernel, scale: float = 1.0) -> float:
    "(N/2d) log(N scale) in the log case, 0 otherwise"
    return N / (2 * d) * math.log(N * scale) if kernel.is_log else 0.0


def blowup_scaling_residual(X: ConfigLike, mu: Density, kernel: RieszKernel) -> float:
    """Relative violation of the blow-up rescaling of F_N.

    With t = N^{1/d}, F_N(tX, mu(./t)) equals
    N^{-s/d} (F_N(X, mu) + (N/2d) log N 1_{s=0}).
    """
    points = _points(X, kernel.d)
    N, d = points.shape
    t = N ** (1.0 / d)
    direct = modulated_energy(points, mu, kernel)
    blown_up = modulated_energy(points * t, mu.dilate(t), kernel)
    expected = N ** (-kernel.s / d) * (direct + _log_correction(N, d, kernel))
    scale = max(abs(blown_up), abs(expected), np.finfo(float).tiny)
    return abs(expected - blown_up) / scale


def _charged_atoms(points: np.ndarray, mu: Density) -> Tuple[np.ndarray, np.ndarray]:
    "Points with charge 1 followed by quadrature nodes with charge -N w_k"
    nodes, weights = mu.quadrature()
    N = len(points)
    atoms = np.concatenate([points, nodes])
    charges = np.concatenate([np.ones(N), -N * weights])
    return atoms, charges


def _pair_blocks(M: int, block: int = 256) -> Sequence[slice]:
    return [slice(a, min(a + block, M)) for a in range(0, M, block)]


def _transport_sum(
    atoms: np.ndarray,
    charges: np.ndarray,
    term: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    velocity: np.ndarray,
    extra: np.ndarray,
) -> float:
    """1/2 sum over ordered pairs a != b of q_a q_b term(dz, dv, dw, mask)

    Blocks of rows are reduced in a fixed order.
    """
    total = 0.0
    M = len(atoms)
    index = np.arange(M)
    for rows in _pair_blocks(M):
        dz = atoms[rows, None, :] - atoms[None, :, :]
        dv = velocity[rows, None, :] - velocity[None, :, :]
        dw = extra[rows, None, :] - extra[None, :, :]
        offdiag = index[rows, None] != index[None, :]
        values = term(dz, dv, dw, offdiag)
        weights = charges[rows, None] * charges[None, :]
        total += float(np.sum(np.where(offdiag, weights * values, 0.0)))
    return 0.5 * total


def _safe_norm2(dz: np.ndarray, mask: np.ndarray) -> np.ndarray:
    r2 = np.sum(dz**2, axis=-1)
    return np.where(mask, r2, 1.0)


def _first_variation(
    s: float, dz: np.ndarray, dv: np.ndarray, r2: np.ndarray
) -> np.ndarray:
    "grad g(dz) . dv = -|dz|^{-s-2} dz . dv"
    return -np.power(r2, -(s + 2) / 2) * np.sum(dz * dv, axis=-1)


def _second_variation(
    s: float, dz: np.ndarray, dv: np.ndarray, r2: np.ndarray
) -> np.ndarray:
    "dv^T D^2 g(dz) dv = |dz|^{-s-2} ((s+2)(dz.dv)^2/|dz|^2 - |dv|^2)"
    if s == -1 and dz.shape[-1] == 1:
        # g = -|x| is piecewise linear on the line
        return np.zeros(dz.shape[:-1])
    proj = np.sum(dz * dv, axis=-1)
    return np.power(r2, -(s + 2) / 2) * (
        (s + 2) * proj**2 / r2 - np.sum(dv**2, axis=-1)
    )


def _increment(s: float, dz: np.ndarray, D: np.ndarray, r2: np.ndarray) -> np.ndarray:
    "g(dz + D) - g(dz) without cancellation"
    rho = (2 * np.sum(dz * D, axis=-1) + np.sum(D**2, axis=-1)) / r2
    with np.errstate(divide="ignore", invalid="ignore"):
        if s == 0:
            return -0.5 * np.log1p(rho)
        return np.power(r2, -s / 2) * np.expm1(-0.5 * s * np.log1p(rho)) / s


def a_n(
    X: ConfigLike,
    mu: Density,
    v: TransportField,
    n: int,
    kernel: RieszKernel,
) -> float:
    """A_n = 1/2 int int_{x != y} D^n g(x - y) : (v(x) - v(y))^n d(f)(x) d(f)(y)

    with f = sum_i delta_{x_i} - N mu, for n in (1, 2). Returns +inf when
    two points coincide.
    """
    if n not in (1, 2):
        raise ValueError(f"A_n is implemented for n in (1, 2), got {n}")
    points = _points(X, kernel.d)
    if len(points) > 1 and Configuration(points).min_gap() == 0:
        return math.inf
    atoms, charges = _charged_atoms(points, mu)
    variation = _first_variation if n == 1 else _second_variation
    s = kernel.s

    def term(
        dz: np.ndarray, dv: np.ndarray, _: np.ndarray, mask: np.ndarray
    ) -> np.ndarray:
        return variation(s, dz, dv, _safe_norm2(dz, mask))

    velocity = v.v(atoms)
    return _transport_sum(atoms, charges, term, velocity, velocity)


def transported_energy(
    X: ConfigLike, mu: Density, v: TransportField, t: float, kernel: RieszKernel
) -> float:
    "F_N((I + tv)X, (I + tv)#mu) on the quadrature nodes of mu"
    points = _points(X, kernel.d)
    atoms, charges = _charged_atoms(points, mu)
    moved = atoms + t * v.v(atoms)

    def term(
        dz: np.ndarray, _v: np.ndarray, _w: np.ndarray, mask: np.ndarray
    ) -> np.ndarray:
        r = np.sqrt(_safe_norm2(dz, mask))
        return np.asarray(kernel.g(r))

    zeros = np.zeros_like(moved)
    return _transport_sum(moved, charges, term, zeros, zeros)


def taylor_remainder(
    X: ConfigLike,
    mu: Density,
    v: TransportField,
    t: float,
    order: int,
    kernel: RieszKernel,
) -> float:
    """F_N((I + tv)X, (I + tv)#mu) - F_N(X, mu) - sum_{n <= order} t^n/n! A_n

    Each pair contributes its own remainder, so the result stays accurate for
    small t.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"Taylor order must be 0, 1 or 2, got {order}")
    points = _points(X, kernel.d)
    atoms, charges = _charged_atoms(points, mu)
    s = kernel.s

    def term(
        dz: np.ndarray, dv: np.ndarray, _: np.ndarray, mask: np.ndarray
    ) -> np.ndarray:
        r2 = _safe_norm2(dz, mask)
        out = _increment(s, dz, t * dv, r2)
        if order >= 1:
            out = out - t * _first_variation(s, dz, dv, r2)
        if order >= 2:
            out = out - 0.5 * t**2 * _second_variation(s, dz, dv, r2)
        return out

    velocity = v.v(atoms)
    return _transport_sum(atoms, charges, term, velocity, velocity)


def flow_taylor_remainder(
    X: ConfigLike,
    mu: Density,
    v: TransportField,
    t: float,
    order: int,
    kernel: RieszKernel,
    steps: int = 16,
) -> float:
    """Taylor remainder of F_N along the flow Phi_t of v.

    The second derivative at t = 0 is A_2(v) + A_1((Dv) v).
    """
    if order not in (0, 1, 2):
        raise ValueError(f"Taylor order must be 0, 1 or 2, got {order}")
    points = _points(X, kernel.d)
    atoms, charges = _charged_atoms(points, mu)
    displacement = flow(v, atoms, t, steps) - atoms
    velocity = v.v(atoms)
    accel = v.acceleration(atoms)
    s = kernel.s
    index = np.arange(len(atoms))
    total = 0.0
    for rows in _pair_blocks(len(atoms)):
        dz = atoms[rows, None, :] - atoms[None, :, :]
        D = displacement[rows, None, :] - displacement[None, :, :]
        dv = velocity[rows, None, :] - velocity[None, :, :]
        dw = accel[rows, None, :] - accel[None, :, :]
        mask = index[rows, None] != index[None, :]
        r2 = _safe_norm2(dz, mask)
        out = _increment(s, dz, D, r2)
        if order >= 1:
            out = out - t * _first_variation(s, dz, dv, r2)
        if order >= 2:
            out = out - 0.5 * t**2 * (
                _second_variation(s, dz, dv, r2) + _first_variation(s, dz, dw, r2)
            )
        weights = charges[rows, None] * charges[None, :]
        total += float(np.sum(np.where(mask, weights * out, 0.0)))
    return 0.5 * total


def remainder_slope(ts: Sequence[float], remainders: Sequence[float]) -> float:
    "Least-squares slope of log|R| against log t"
    return float(np.polyfit(np.log(ts), np.log(np.abs(remainders)), 1)[0])


def commutator_ratio(
    X: ConfigLike, mu: Density, v: TransportField, kernel: RieszKernel
) -> float:
    """Scale-free size of A_1 against the modulated energy.

    |A_1| / (|Dv|_inf (F_N + (N/2d) log(N |mu|_inf) 1_{s=0} + N^{1+s/d} |mu|_inf^{s/d}))
    """
    points = _points(X, kernel.d)
    N, d = points.shape
    A1 = a_n(points, mu, v, 1, kernel)
    if A1 == 0:
        return 0.0
    sup = mu.sup()
    bound = (
        modulated_energy(points, mu, kernel)
        + _log_correction(N, d, kernel, sup)
        + N ** (1 + kernel.s / d) * sup ** (kernel.s / d)
    )
    if bound <= 0 or v.lipschitz == 0:
        return math.inf
    return abs(A1) / (v.lipschitz * bound)


def energy_lower_bound_ratio(X: ConfigLike, mu: Density, kernel: RieszKernel) -> float:
    """Smallest C with the modulated energy lower bound

    F_N + (N/2d) log(N |mu|_inf) 1_{s=0} >= -C |mu|_inf^{s/d} N^{1+s/d}
    """
    points = _points(X, kernel.d)
    N, d = points.shape
    sup = mu.sup()
    lhs = modulated_energy(points, mu, kernel) + _log_correction(N, d, kernel, sup)
    return -lhs / (sup ** (kernel.s / d) * N ** (1 + kernel.s / d))
