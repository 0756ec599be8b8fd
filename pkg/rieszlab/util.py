import ast
import itertools
import math
import operator
import subprocess
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, Tuple, Union

import numpy as np

from . import __version__
from .errors import ConfigError

#: float format for every emitted table
FLOAT_FORMAT = "%.17g"


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for chain `stream` of experiment `seed`.

    Distinct streams are statistically independent and do not depend on the
    order in which they are created.
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(sequence))


def integer_shell(d: int, m: int) -> np.ndarray:
    """Integer vectors n in Z^d with max |n_i| == m, as rows

    Shell 0 is the origin.
    """
    if m == 0:
        return np.zeros((1, d), dtype=int)
    side = range(-m, m + 1)
    rows = [n for n in itertools.product(side, repeat=d) if max(map(abs, n)) == m]
    return np.array(rows, dtype=int)


def integer_shells(d: int) -> Iterator[Tuple[int, np.ndarray]]:
    "Yields (m, shell) for m = 0, 1, 2, ..."
    for m in itertools.count():
        yield m, integer_shell(d, m)


def pair_differences(points: np.ndarray) -> np.ndarray:
    "Array of x_i - x_j with shape (N, N, d)"
    return points[:, None, :] - points[None, :, :]


def offdiagonal(matrix: np.ndarray) -> np.ndarray:
    "Entries i != j of a square matrix, in row-major order"
    n = matrix.shape[0]
    return matrix[~np.eye(n, dtype=bool)]


def as_points(x: Any, d: int) -> np.ndarray:
    """Coerce a point or a list of points to shape (M, d).

    Scalars are accepted in dimension one.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if d == 1 else arr.reshape(1, -1)
    if arr.shape[-1] != d:
        raise ValueError(f"Expected points in dimension {d}, got shape {arr.shape}")
    return arr


def version_stamp() -> str:
    "git-describe-style version, falling back to the package version"
    root = Path(__file__).resolve().parent.parent
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=root,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return f"v{__version__}"
    described = out.stdout.strip()
    if out.returncode != 0 or not described:
        return f"v{__version__}"
    return described


_BINARY: Dict[type, Callable[[float, float], float]] = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCTIONS: Dict[str, Callable[[float], float]] = {
    "log": math.log,
    "sqrt": math.sqrt,
    "exp": math.exp,
}


def eval_formula(formula: Union[str, float], **variables: float) -> float:
    """Evaluate an arithmetic formula such as ``"2*log(N)"``

    Only numbers, the given variables, + - * / ** and log/sqrt/exp are allowed.
    """
    if not isinstance(formula, str):
        return float(formula)

    def visit(node: ast.AST) -> float:
        if isinstance(node, ast.Expression):
            return visit(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in variables:
            return float(variables[node.id])
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            value = visit(node.operand)
            return -value if isinstance(node.op, ast.USub) else value
        if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
            return _BINARY[type(node.op)](visit(node.left), visit(node.right))
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCTIONS
            and len(node.args) == 1
        ):
            return _FUNCTIONS[node.func.id](visit(node.args[0]))
        raise ConfigError(f"Unsupported expression in formula {formula!r}")

    try:
        tree = ast.parse(formula, mode="eval")
    except SyntaxError as err:
        raise ConfigError(f"Cannot parse formula {formula!r}") from err
    try:
        return visit(tree)
    except (ArithmeticError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"Cannot evaluate formula {formula!r}: {err}") from err
