"""Exceptions raised by rieszlab.

Every exception carries the exit code the command line maps it to.
"""
from typing import Dict, List, Optional, Sequence


class RieszLabError(Exception):
    #: process exit code used by the command line
    exit_code: int = 1


class ConfigError(RieszLabError, ValueError):
    "Invalid or unknown configuration key"
    exit_code = 2


class KernelRangeError(RieszLabError, ValueError):
    "(d, s) outside the supported range d - 2 <= s < d"
    exit_code = 2


class UnsupportedError(RieszLabError, NotImplementedError):
    exit_code = 2


class SingularEvaluationError(RieszLabError, ArithmeticError):
    "A kernel was evaluated at a coincidence"
    exit_code = 3


class NumericalError(RieszLabError):
    exit_code = 3


class ConvergenceError(NumericalError):
    history: List[float]

    def __init__(self, message: str, history: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.history = list(history or [])


class QuadratureError(NumericalError):
    pass


class BlowUpError(NumericalError):
    #: index of the step at which the blow-up was detected
    step: int

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class LineSearchError(NumericalError):
    pass


class CoincidenceSetError(NumericalError):
    "The coincidence set of an obstacle problem reached the box boundary"


class EwaldTruncationError(NumericalError):
    suggested: Dict[str, int]

    def __init__(self, message: str, suggested: Dict[str, int]):
        super().__init__(f"{message}; try cutoffs {suggested}")
        self.suggested = suggested


class AcceptanceError(RieszLabError):
    exit_code = 4
    failed: List[str]

    def __init__(self, failed: Sequence[str]):
        super().__init__("Acceptance checks failed: " + ", ".join(failed))
        self.failed = list(failed)
