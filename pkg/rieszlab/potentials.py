"""Confining potentials V and their registry."""
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, Optional, Type

import numpy as np

from .errors import UnsupportedError


class Potential(ABC):
    """External confinement V with analytic gradient and Laplacian.

    All methods take points of shape (M, d) and are vectorized.
    """

    #: registry name
    name: str = "potential"
    #: growth tag; "confining" means V + g -> +inf at infinity
    growth: str = "confining"

    @abstractmethod
    def value(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def laplacian(self, x: np.ndarray) -> np.ndarray:
        ...

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(x)

    def params(self) -> Dict[str, float]:
        "Parameters echoed in output files"
        return {}

    def describe(self) -> Dict[str, Any]:
        return {"name": self.name, **self.params()}

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, self.__class__):
            return False
        return self.params() == other.params()

    def __hash__(self) -> int:
        return hash((self.name, tuple(sorted(self.params().items()))))


class RadialPotential(Potential):
    """V(x) = (k/2)|x|^2 + b|x|^4"""

    name = "quartic"

    def __init__(self, k: float = 1.0, b: float = 0.0):
        if k < 0 or b < 0 or (k == 0 and b == 0):
            raise UnsupportedError(f"Radial potential k={k}, b={b} is not confining")
        self.k = float(k)
        self.b = float(b)

    def params(self) -> Dict[str, float]:
        return {"k": self.k, "b": self.b}

    def value(self, x: np.ndarray) -> np.ndarray:
        r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
        return 0.5 * self.k * r2 + self.b * r2**2

    def gradient(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(x, dtype=float)
        r2 = np.sum(y**2, axis=-1)
        return (self.k + 4 * self.b * r2)[..., None] * y

    def laplacian(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(x, dtype=float)
        d = y.shape[-1]
        r2 = np.sum(y**2, axis=-1)
        return self.k * d + self.b * (4 * d + 8) * r2

    def sup_laplacian(self, radius: float, d: int) -> float:
        "sup of Delta V over the ball of the given radius"
        return self.k * d + self.b * (4 * d + 8) * radius**2


class QuadraticPotential(RadialPotential):
    "V(x) = (k/2)|x|^2"

    name = "quadratic"

    def __init__(self, k: float = 1.0):
        super().__init__(k=k, b=0.0)

    def params(self) -> Dict[str, float]:
        return {"k": self.k}


class CallablePotential(Potential):
    "Potential assembled from user callables; not part of the registry"

    name = "callable"

    def __init__(
        self,
        value: Callable[[np.ndarray], np.ndarray],
        gradient: Callable[[np.ndarray], np.ndarray],
        laplacian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ):
        self._value = value
        self._gradient = gradient
        self._laplacian = laplacian

    def value(self, x: np.ndarray) -> np.ndarray:
        return self._value(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self._gradient(x)

    def laplacian(self, x: np.ndarray) -> np.ndarray:
        if self._laplacian is None:
            raise UnsupportedError("This potential has no Laplacian")
        return self._laplacian(x)

    def __eq__(self, other: Any) -> bool:
        return self is other

    def __hash__(self) -> int:
        return id(self)


_REGISTRY: Dict[str, Type[RadialPotential]] = {
    "quadratic": QuadraticPotential,
    "quartic": RadialPotential,
}


def create_potential(name: str, **params: float) -> Potential:
    "Factory for the registered families"
    try:
        cls = _REGISTRY[name]
    except KeyError:
        raise UnsupportedError(f"Unknown potential family {name!r}") from None
    try:
        return cls(**params)
    except TypeError as err:
        raise UnsupportedError(f"Bad parameters for {name}: {err}") from err


def registered_potentials() -> Dict[str, Type[RadialPotential]]:
    return dict(_REGISTRY)
