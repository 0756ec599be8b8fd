"""Result reports shared by the solvers and the command line.

Each report has a human readable message and a ``to_dict`` used for JSON
output.
"""
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


@dataclass
class Report:
    message: str

    def __str__(self) -> str:
        return self.message

    def to_dict(self) -> Dict[str, Any]:
        return {
            f.name: _plain(getattr(self, f.name))
            for f in dataclasses.fields(self)
            if f.name != "message"
        }


@dataclass
class ResidualReport(Report):
    "Euler-Lagrange violation of a candidate equilibrium measure"
    message: str = field(init=False)
    on_support: float
    off_support: float

    def __post_init__(self) -> None:
        self.message = (
            f"E-L residual {self.on_support:.3g} on support, "
            f"{self.off_support:.3g} off support"
        )

    def passes(self, tol: float) -> bool:
        return self.on_support <= tol and self.off_support >= -tol


@dataclass
class MinimizerReport(Report):
    "Structure of an energy minimizer"
    message: str = field(init=False)
    hamiltonian: float
    localization: float
    separation: float
    iterations: int

    def __post_init__(self) -> None:
        self.message = (
            f"H_N={self.hamiltonian:.10g} after {self.iterations} iterations, "
            f"max zeta={self.localization:.3g}, "
            f"min gap*N^(1/d)={self.separation:.4g}"
        )


@dataclass
class TrajectoryReport(Report):
    """Modulated energy and distance to the reference along a trajectory"""

    times: List[float] = field(default_factory=list)
    modulated: List[float] = field(default_factory=list)
    hamiltonian: List[float] = field(default_factory=list)
    distance: List[float] = field(default_factory=list)
    #: additive constant C_0 of the Gronwall quantity
    offset: float = 0.0
    #: fitted exponential rate C
    rate: float = 0.0
    N: int = 0

    def series(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.times,
                "F_N": self.modulated,
                "H_N": self.hamiltonian,
                "bl_distance": self.distance,
            }
        )


@dataclass
class CLTReport(Report):
    mean: float = math.nan
    variance: float = math.nan
    predicted_variance: float = math.nan
    prediction_error: float = 0.0
    ratio: float = math.nan
    anderson_statistic: float = math.nan
    anderson_pvalue: float = math.nan
    ks_pvalue: float = math.nan
    samples: int = 0
    bulk_distance: Optional[float] = None
    matches_prediction: bool = False


@dataclass
class NumberVarianceReport(Report):
    radii: List[float] = field(default_factory=list)
    expected: List[float] = field(default_factory=list)
    variances: List[float] = field(default_factory=list)
    slope: float = math.nan

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "R": self.radii,
                "expected_count": self.expected,
                "variance": self.variances,
            }
        )


@dataclass
class ScanReport(Report):
    tau: complex = 0j
    energy: float = math.nan
    #: grid cell around the minimizer, ((tau1_lo, tau1_hi), (tau2_lo, tau2_hi))
    interval: Tuple[Tuple[float, float], Tuple[float, float]] = ((0.0, 0.0), (0.0, 0.0))
    table: pd.DataFrame = field(default_factory=pd.DataFrame)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tau": [self.tau.real, self.tau.imag],
            "energy": self.energy,
            "interval": _plain(self.interval),
        }
