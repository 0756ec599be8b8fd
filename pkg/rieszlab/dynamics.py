"""Mean-field diagnostics for the gradient and conservative flows.

The particles follow dx_i = M F_i dt (+ sqrt(2/theta) dW_i) with
F_i = -(1/N) grad_{x_i} H_N, where M is the identity (gradient flow) or a fixed
antisymmetric matrix J (conservative flow). The reference measure is the
equilibrium measure mu_V, which is stationary for the confined mean-field
equation, and the modulated energy F_N(X^t, mu_V) is recorded along the way.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .density import Density
from .equilibrium import EquilibriumResult, analytic_equilibrium
from .errors import BlowUpError
from .modenergy import ConfigLike, _points, hamiltonian, modulated_energy
from .reports import TrajectoryReport
from .sampler import GibbsModel, _safe_force
from .util import as_points, make_rng

logger = logging.getLogger(__name__)

FLOWS = ("gradient", "conservative")
INTEGRATORS = ("euler", "midpoint")

TestFunction = Callable[[np.ndarray], np.ndarray]


def rotation(d: int = 2) -> np.ndarray:
    "Rotation by pi/2 in the first two coordinates"
    if d < 2:
        raise ValueError("The conservative flow needs d >= 2")
    J = np.zeros((d, d))
    J[0, 1], J[1, 0] = -1.0, 1.0
    return J


def _mobility(d: int, flow: str, J: Optional[np.ndarray], reverse: bool) -> np.ndarray:
    if flow not in FLOWS:
        raise ValueError(f"Unknown flow {flow!r}; expected one of {FLOWS}")
    if flow == "gradient":
        if reverse:
            raise ValueError("The gradient flow cannot be reversed")
        return np.eye(d)
    M = rotation(d) if J is None else np.asarray(J, dtype=float)
    if M.shape != (d, d) or not np.allclose(M, -M.T):
        raise ValueError("J must be an antisymmetric d x d matrix")
    return -M if reverse else M


@dataclass
class FlowRun:
    "Snapshots of one integrated trajectory"

    times: List[float]
    snapshots: List[np.ndarray]

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]


def integrate_flow(
    model: GibbsModel,
    X0: ConfigLike,
    T: float,
    step: float,
    flow: str = "gradient",
    integrator: str = "midpoint",
    J: Optional[np.ndarray] = None,
    reverse: bool = False,
    noise: bool = False,
    seed: int = 0,
    stream: int = 0,
    record_every: int = 1,
) -> FlowRun:
    """Integrate the particle flow up to time T with a fixed step.

    The gradient flow always uses explicit Euler; the conservative flow uses
    the explicit midpoint rule unless ``integrator="euler"``. With ``noise``
    an Euler-Maruyama increment sqrt(2 h / theta) xi is added after each step.
    """
    if step <= 0:
        raise ValueError(f"Step size must be positive, got {step}")
    if integrator not in INTEGRATORS:
        raise ValueError(f"Unknown integrator {integrator!r}")
    x = np.array(_points(X0, model.d), dtype=float)
    M = _mobility(model.d, flow, J, reverse)
    midpoint = flow == "conservative" and integrator == "midpoint"
    rng = make_rng(seed, stream) if noise else None
    amplitude = math.sqrt(2 * step / model.theta) if noise else 0.0

    def velocity(y: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            return _safe_force(y, model) @ M.T

    n_steps = max(1, int(round(T / step)))
    times, snapshots = [0.0], [x.copy()]
    for k in range(1, n_steps + 1):
        if midpoint:
            x = x + step * velocity(x + 0.5 * step * velocity(x))
        else:
            x = x + step * velocity(x)
        if rng is not None:
            x = x + amplitude * rng.standard_normal(x.shape)
        if not np.all(np.isfinite(x)):
            raise BlowUpError(f"{flow} flow produced non-finite positions", k)
        if k % record_every == 0 or k == n_steps:
            times.append(k * step)
            snapshots.append(x.copy())
    return FlowRun(times, snapshots)


def gronwall_envelope(
    times: Sequence[float], modulated: Sequence[float], N: int, d: int, s: float
) -> Tuple[float, float, np.ndarray]:
    """(C_0, C, Xi) for Xi(t) = (F_N + (N/2d) log N 1_{s=0} + C_0 N^{1+s/d}) / N^2

    C_0 is the smallest nonnegative integer keeping Xi positive and C is
    max_t log(Xi(t)/Xi(0)) / t, clipped at 0.
    """
    correction = N / (2 * d) * math.log(N) if s == 0 else 0.0
    shifted = np.asarray(modulated, dtype=float) + correction
    scale = N ** (1 + s / d)
    C0 = max(0, math.floor(-shifted.min() / scale) + 1) if shifted.min() <= 0 else 0
    xi = (shifted + C0 * scale) / N**2
    t = np.asarray(times, dtype=float)
    later = t > 0
    if not np.any(later):
        return float(C0), 0.0, xi
    rates = np.log(xi[later] / xi[0]) / t[later]
    return float(C0), max(0.0, float(rates.max())), xi


def meanfield_track(
    model: GibbsModel,
    X0: Optional[ConfigLike] = None,
    flow: str = "gradient",
    T: float = 1.0,
    step: float = 1e-2,
    integrator: str = "midpoint",
    J: Optional[np.ndarray] = None,
    noise: bool = False,
    seed: int = 0,
    record_every: int = 1,
    equilibrium: Optional[EquilibriumResult] = None,
) -> TrajectoryReport:
    """Track F_N(X^t, mu_V), H_N and the bounded-Lipschitz distance to mu_V.

    Without X0 the start is drawn i.i.d. from mu_V using stream 0 of ``seed``;
    the noise uses stream 1.
    """
    if equilibrium is None:
        equilibrium = analytic_equilibrium(model.V, model.kernel)
    mu = equilibrium.density
    if X0 is None:
        X0 = mu.sample(model.N, make_rng(seed, 0))
    run = integrate_flow(
        model,
        X0,
        T,
        step,
        flow,
        integrator,
        J,
        noise=noise,
        seed=seed,
        stream=1,
        record_every=record_every,
    )
    kernel = model.kernel
    modulated = [modulated_energy(x, mu, kernel) for x in run.snapshots]
    energies = [hamiltonian(x, model.V, kernel) for x in run.snapshots]
    dictionary = bl_dictionary(mu)
    reference = reference_integrals(mu, dictionary)
    distances = [
        empirical_distance(x, mu, dictionary=dictionary, reference=reference)
        for x in run.snapshots
    ]
    C0, rate, xi = gronwall_envelope(run.times, modulated, model.N, model.d, kernel.s)
    logger.info(
        f"{flow} flow to T={T:g}: F_N/N^2 {modulated[0] / model.N**2:.4g} -> "
        f"{modulated[-1] / model.N**2:.4g}, fitted rate {rate:.3g} (C_0={C0:g})"
    )
    message = (
        f"{flow} flow, N={model.N}, T={T:g}, h={step:g}: "
        f"Xi {xi[0]:.4g} -> {xi[-1]:.4g}, rate {rate:.3g}"
    )
    return TrajectoryReport(
        message,
        list(run.times),
        modulated,
        energies,
        distances,
        C0,
        rate,
        model.N,
    )


def _grid_centres(mu: Density, per_side: int) -> np.ndarray:
    half = 1.5 * mu.radius
    axis = np.linspace(-half, half, per_side)
    mesh = np.meshgrid(*([axis] * mu.d), indexing="ij")
    return mu.center + np.stack([m.ravel() for m in mesh], axis=-1)


def _unit_directions(d: int, count: int = 8) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        phi = 2 * math.pi * np.arange(count) / count
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    return np.concatenate([np.eye(d), -np.eye(d)])


def bl_dictionary(mu: Density, per_side: int = 13) -> List[TestFunction]:
    """1-Lipschitz test functions bounded by 1 used for the BL distance.

    * tents min(1, (r - |x - c|)_+) for centres c on a grid covering 1.5 times
      the support and radii r in R/8, R/4, R/2, R;
    * ramps min(1, max(0, e.x - b)) for unit directions e and offsets b;
    * distance profiles min(|x - c|, 1) for the same centres.
    """
    R = mu.radius
    centres = _grid_centres(mu, per_side)
    functions: List[TestFunction] = []

    def tent(c: np.ndarray, r: float) -> TestFunction:
        return lambda x: np.clip(r - np.linalg.norm(x - c, axis=-1), 0.0, 1.0)

    def ramp(e: np.ndarray, b: float) -> TestFunction:
        return lambda x: np.clip(x @ e - b, 0.0, 1.0)

    def profile(c: np.ndarray) -> TestFunction:
        return lambda x: np.minimum(np.linalg.norm(x - c, axis=-1), 1.0)

    for c in centres:
        functions.extend(tent(c, r) for r in (R / 8, R / 4, R / 2, R))
        functions.append(profile(c))
    for e in _unit_directions(mu.d):
        start = float(e @ mu.center)
        offsets = start + np.linspace(-1.5 * R, 1.5 * R, 13)
        functions.extend(ramp(e, b) for b in offsets)
    return functions


def reference_integrals(mu: Density, dictionary: Sequence[TestFunction]) -> np.ndarray:
    "int phi dmu for each test function, by the quadrature of mu"
    return np.array([mu.integrate(phi) for phi in dictionary])


def empirical_distance(
    X: ConfigLike,
    mu: Density,
    weights: Optional[Sequence[float]] = None,
    dictionary: Optional[Sequence[TestFunction]] = None,
    reference: Optional[np.ndarray] = None,
) -> float:
    """Bounded-Lipschitz distance between sum_i w_i delta_{x_i} and mu,
    maximized over the test functions of ``bl_dictionary``.

    The weights default to 1/N.
    """
    points = as_points(_points(X, mu.d), mu.d)
    N = len(points)
    w = np.full(N, 1.0 / N) if weights is None else np.asarray(weights, dtype=float)
    if dictionary is None:
        dictionary = bl_dictionary(mu)
    if reference is None:
        reference = reference_integrals(mu, dictionary)
    empirical = np.array([float(w @ phi(points)) for phi in dictionary])
    return float(np.abs(empirical - reference).max())
