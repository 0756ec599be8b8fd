"""Linear statistics, discrepancies and the CLT harness.

Fluct_mu(xi) = sum_i xi(x_i) - N int xi dmu. In the plane its variance under
the Gibbs measure tends to (1/(2 pi beta)) int |grad xi|^2 for xi supported in
the bulk; on the line (log gas) it tends to (1/(2 beta)) sum_k k a_k^2 with a_k
the Chebyshev coefficients of xi on the support interval.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .density import AnalyticDensity, Density
from .errors import UnsupportedError
from .modenergy import ConfigLike, Configuration, _points, bump_profile
from .reports import CLTReport, NumberVarianceReport
from .sampler import SampleEnsemble

logger = logging.getLogger(__name__)

Box = Tuple[np.ndarray, np.ndarray]


@dataclass
class TestFunction:
    """Compactly supported test function xi with its gradient.

    The support is contained in the ball B(center, radius); ``scale`` records
    l for mesoscopic functions xi_0((x - center) / l).
    """

    __test__ = False

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    center: np.ndarray
    radius: float
    smoothness: str = "C-infinity"
    scale: float = 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(x)

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def support(self) -> Box:
        return self.center - self.radius, self.center + self.radius


def bump(
    center: Sequence[float], radius: float, height: float = 1.0
) -> TestFunction:
    "height * exp(1 - 1/(1 - |x - c|^2 / r^2)) inside B(c, r), 0 outside"
    c = np.asarray(center, dtype=float)
    if radius <= 0:
        raise ValueError(f"Bump radius must be positive, got {radius}")

    def value(x: np.ndarray) -> np.ndarray:
        q = np.sum((np.asarray(x, dtype=float) - c) ** 2, axis=-1) / radius**2
        return height * bump_profile(q)[0]

    def gradient(x: np.ndarray) -> np.ndarray:
        y = np.asarray(x, dtype=float) - c
        q = np.sum(y**2, axis=-1) / radius**2
        return (height * bump_profile(q)[1] * 2 / radius**2)[:, None] * y

    return TestFunction(value, gradient, c, float(radius))


def mesoscopic(
    xi0: TestFunction, center: Sequence[float], scale: float
) -> TestFunction:
    "x -> xi_0((x - center) / scale) for xi_0 centred at the origin"
    c = np.asarray(center, dtype=float)
    offset = c - scale * xi0.center

    def value(x: np.ndarray) -> np.ndarray:
        return xi0.value((np.asarray(x, dtype=float) - offset) / scale)

    def gradient(x: np.ndarray) -> np.ndarray:
        return xi0.gradient((np.asarray(x, dtype=float) - offset) / scale) / scale

    return TestFunction(
        value, gradient, c, scale * xi0.radius, xi0.smoothness, scale * xi0.scale
    )


def _gauss_rule(
    lower: float, upper: float, order: int, panels: int
) -> Tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lower, upper, panels + 1)
    half = np.diff(edges) / 2
    mids = (edges[:-1] + edges[1:]) / 2
    nodes = (mids[:, None] + half[:, None] * t[None]).ravel()
    weights = (half[:, None] * w[None]).ravel()
    return nodes, weights


def _tensor_integral(
    f: Callable[[np.ndarray], np.ndarray], box: Box, order: int, panels: int
) -> float:
    lower, upper = box
    rules = [_gauss_rule(lo, hi, order, panels) for lo, hi in zip(lower, upper)]
    nodes = np.stack(
        np.meshgrid(*[r[0] for r in rules], indexing="ij"), axis=-1
    ).reshape(-1, len(rules))
    weights = rules[0][1]
    for rule in rules[1:]:
        weights = np.multiply.outer(weights, rule[1])
    return float(np.dot(f(nodes), weights.ravel()))


def dirichlet_energy(
    xi: TestFunction, box: Optional[Box] = None, order: int = 32, panels: int = 8
) -> Tuple[float, float]:
    """int |grad xi|^2 by composite tensor Gauss-Legendre quadrature.

    Returns the value and an error estimate from halving the panel count.
    """
    box = xi.support if box is None else box

    def integrand(x: np.ndarray) -> np.ndarray:
        return np.sum(xi.gradient(x) ** 2, axis=-1)

    fine = _tensor_integral(integrand, box, order, panels)
    coarse = _tensor_integral(integrand, box, order, max(1, panels // 2))
    return fine, abs(fine - coarse)


def chebyshev_energy(
    xi: TestFunction, mu: AnalyticDensity, degree: int = 256
) -> Tuple[float, float]:
    """sum_k k a_k^2 for xi(c + R cos t) = a_0/2 + sum_k a_k cos(k t) on the
    support [c - R, c + R] of mu, with the tail of the series as error estimate
    """
    c, R = float(mu.center[0]), mu.radius

    def along(u: np.ndarray) -> np.ndarray:
        return xi.value((c + R * np.asarray(u))[:, None])

    coef = np.polynomial.chebyshev.chebinterpolate(along, degree)
    k = np.arange(len(coef))
    terms = k * coef**2
    return float(terms.sum()), float(terms[-degree // 8 :].sum())


def predicted_variance(
    xi: TestFunction, mu: Density, beta: float, s: float = 0.0
) -> Tuple[float, float]:
    """Limiting variance of Fluct(xi) for the log gases, with a quadrature error.

    d = 2 (Coulomb): (1/(2 pi beta)) int |grad xi|^2.
    d = 1 (log): (1/(2 beta)) sum_k k a_k^2, needing an interval support.
    """
    if mu.d == 2 and s == 0:
        energy, error = dirichlet_energy(xi)
        scale = 1 / (2 * math.pi * beta)
    elif mu.d == 1 and s == 0:
        if not isinstance(mu, AnalyticDensity):
            raise UnsupportedError("The 1D prediction needs an interval support")
        energy, error = chebyshev_energy(xi, mu)
        scale = 1 / (2 * beta)
    else:
        raise UnsupportedError(f"No variance prediction for d={mu.d}, s={s}")
    return scale * energy, scale * error


def iid_variance(xi: TestFunction, mu: Density, N: int) -> float:
    "N (int xi^2 dmu - (int xi dmu)^2), the variance for independent points"
    first = mu.integrate(xi.value)
    second = mu.integrate(lambda x: xi.value(x) ** 2)
    return N * (second - first**2)


def fluct(X: ConfigLike, mu: Density, xi: TestFunction) -> float:
    "sum_i xi(x_i) - N int xi dmu"
    points = _points(X, mu.d)
    return float(np.sum(xi.value(points))) - len(points) * mu.integrate(xi.value)


class Region(ABC):
    "Measurable region with membership test and mass under a density"

    @abstractmethod
    def contains(self, points: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def mass(self, mu: Density) -> float:
        ...

    def __or__(self, other: "Region") -> "RegionUnion":
        return RegionUnion([self, other])


@dataclass
class Ball(Region):
    "Closed ball |x - center| <= radius"

    center: np.ndarray
    radius: float

    def contains(self, points: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        return np.linalg.norm(points - c, axis=-1) <= self.radius

    def mass(self, mu: Density) -> float:
        return mu.ball_mass(self.center, self.radius)


@dataclass
class Annulus(Region):
    "inner < |x - center| <= outer, so that Ball(inner) and Annulus tile Ball(outer)"

    center: np.ndarray
    inner: float
    outer: float

    def contains(self, points: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(points - np.asarray(self.center, dtype=float), axis=-1)
        return (r > self.inner) & (r <= self.outer)

    def mass(self, mu: Density) -> float:
        return mu.ball_mass(self.center, self.outer) - mu.ball_mass(
            self.center, self.inner
        )


@dataclass
class RegionUnion(Region):
    "Union of pairwise disjoint regions"

    parts: List[Region]

    def contains(self, points: np.ndarray) -> np.ndarray:
        inside = np.zeros(len(points), dtype=bool)
        for part in self.parts:
            inside |= part.contains(points)
        return inside

    def mass(self, mu: Density) -> float:
        return sum(part.mass(mu) for part in self.parts)

    def __or__(self, other: Region) -> "RegionUnion":
        return RegionUnion(self.parts + [other])


def discrepancy(
    X: ConfigLike,
    mu: Density,
    center: Union[Region, Sequence[float]],
    R: Optional[float] = None,
) -> float:
    """#{x_i in A} - N mu(A) for a region A, or the ball B(center, R)"""
    if isinstance(center, Region):
        region = center
    else:
        if R is None:
            raise ValueError("discrepancy needs a radius with a centre")
        region = Ball(np.asarray(center, dtype=float), R)
    points = _points(X, mu.d)
    count = np.count_nonzero(region.contains(points))
    return float(count) - len(points) * region.mass(mu)


def ad_pvalue(statistic: float, M: int) -> float:
    """p-value of the Anderson-Darling normality test with estimated mean and
    variance, from the modified statistic A^2 (1 + 0.75/M + 2.25/M^2)
    """
    A = statistic * (1 + 0.75 / M + 2.25 / M**2)
    if A >= 0.6:
        p = math.exp(1.2937 - 5.709 * A + 0.0186 * A**2)
    elif A >= 0.34:
        p = math.exp(0.9177 - 4.279 * A - 1.38 * A**2)
    elif A >= 0.2:
        p = 1 - math.exp(-8.318 + 42.796 * A - 59.938 * A**2)
    else:
        p = 1 - math.exp(-13.436 + 101.14 * A - 223.73 * A**2)
    return min(1.0, max(0.0, p))


def bulk_distance(xi: TestFunction, mu: Density) -> float:
    "Distance from the support ball of xi to the boundary of the droplet of mu"
    offset = float(np.linalg.norm(xi.center - mu.center))
    return mu.radius - offset - xi.radius


def clt_harness(
    ensemble: Union[SampleEnsemble, Sequence[Configuration]],
    mu: Density,
    xi: TestFunction,
    beta: float = 2.0,
    s: float = 0.0,
) -> CLTReport:
    """Compare the empirical law of Fluct(xi) over an ensemble with the
    Gaussian limit: moments, variance ratio and normality p-values
    """
    configurations = list(ensemble)
    M = len(configurations)
    if M < 50:
        logger.warning(f"CLT harness with only {M} samples is under-powered")
    values = np.array([fluct(X, mu, xi) for X in configurations])
    mean, variance = float(values.mean()), float(values.var(ddof=1))
    distance = bulk_distance(xi, mu)
    if distance < 0.1 * 2 * mu.radius:
        logger.warning(
            f"test function is {distance:.3g} from the droplet edge; the bulk CLT "
            "needs 0.1 diam"
        )
    try:
        predicted, error = predicted_variance(xi, mu, beta, s)
    except UnsupportedError as err:
        logger.warning(str(err))
        predicted, error = math.nan, math.nan
    ratio = variance / predicted if predicted > 0 else math.nan
    standardized = (values - mean) / math.sqrt(variance) if variance > 0 else values
    anderson = float(stats.anderson(values, dist="norm").statistic)
    ad_p = ad_pvalue(anderson, M)
    ks_p = float(stats.kstest(standardized, "norm").pvalue)
    matches = bool(0.75 <= ratio <= 1.25 and ad_p > 0.01)
    message = (
        f"Fluct over {M} samples: mean {mean:.4g}, variance {variance:.4g} "
        f"(predicted {predicted:.4g}, ratio {ratio:.3f}), AD p={ad_p:.3g}"
    )
    logger.info(message)
    return CLTReport(
        message,
        mean,
        variance,
        predicted,
        error,
        ratio,
        anderson,
        ad_p,
        ks_p,
        M,
        distance,
        matches,
    )


def counts_in_balls(
    configurations: Iterable[ConfigLike],
    center: Sequence[float],
    radii: Sequence[float],
) -> np.ndarray:
    "Point counts, shape (samples, radii)"
    c = np.asarray(center, dtype=float)
    rows = []
    for X in configurations:
        r = np.linalg.norm(_points(X, len(c)) - c, axis=-1)
        rows.append([np.count_nonzero(r <= R) for R in radii])
    return np.array(rows, dtype=float)


def number_variance_curve(
    ensemble: Union[SampleEnsemble, Sequence[Configuration]],
    radii: Sequence[float],
    center: Optional[Sequence[float]] = None,
) -> NumberVarianceReport:
    """Variance of the number of points in B(center, R) for each radius, and
    the least-squares slope of log variance against log mean count
    """
    configurations = list(ensemble)
    d = _points(configurations[0]).shape[1]
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    counts = counts_in_balls(configurations, c, radii)
    expected = counts.mean(axis=0)
    variances = counts.var(axis=0, ddof=1)
    usable = (expected > 0) & (variances > 0)
    slope = (
        float(np.polyfit(np.log(expected[usable]), np.log(variances[usable]), 1)[0])
        if np.count_nonzero(usable) >= 2
        else math.nan
    )
    message = f"number variance slope {slope:.3f} over {len(radii)} radii"
    logger.info(message)
    return NumberVarianceReport(
        message, list(map(float, radii)), expected.tolist(), variances.tolist(), slope
    )


def local_field(
    X: ConfigLike, center: Sequence[float], window: float, N: Optional[int] = None
) -> Configuration:
    """Blown-up configuration N^{1/d} (x_i - center) restricted to the cube
    [-window, window]^d
    """
    c = np.asarray(center, dtype=float)
    points = _points(X, len(c))
    n = len(points) if N is None else N
    blown = n ** (1.0 / len(c)) * (points - c)
    inside = np.all(np.abs(blown) <= window, axis=-1)
    return Configuration(blown[inside], {"center": c.tolist(), "window": window})


def pair_count(X: ConfigLike, r: float) -> int:
    "Number of unordered pairs at distance at most r"
    points = _points(X)
    if len(points) < 2:
        return 0
    tree = cKDTree(points)
    return len(tree.query_pairs(r))


def batch_means_error(series: Sequence[float], n_batches: int = 20) -> float:
    """Standard error of the mean of a correlated series by batch means"""
    x = np.asarray(series, dtype=float)
    size = len(x) // n_batches
    if size < 1:
        raise ValueError(f"{len(x)} values cannot fill {n_batches} batches")
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))
