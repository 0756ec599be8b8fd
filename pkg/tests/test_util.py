import math

import numpy as np
import pytest

from rieszlab.errors import ConfigError
from rieszlab.util import (
    as_points,
    eval_formula,
    integer_shell,
    make_rng,
    offdiagonal,
    version_stamp,
)


def test_make_rng_streams() -> None:
    first = make_rng(7, 3).random(5)
    assert np.array_equal(first, make_rng(7, 3).random(5))
    assert not np.array_equal(first, make_rng(7, 4).random(5))
    assert not np.array_equal(first, make_rng(8, 3).random(5))


def test_integer_shell() -> None:
    assert integer_shell(3, 0).tolist() == [[0, 0, 0]]
    shell = integer_shell(2, 1)
    assert len(shell) == 8
    assert np.abs(shell).max(axis=1).tolist() == [1] * 8
    assert len(integer_shell(2, 2)) == 16


def test_as_points() -> None:
    assert as_points(1.5, 1).shape == (1, 1)
    assert as_points([1.0, 2.0], 2).shape == (1, 2)
    assert as_points([1.0, 2.0, 3.0], 1).shape == (3, 1)
    with pytest.raises(ValueError):
        as_points([1.0, 2.0, 3.0], 2)


def test_offdiagonal() -> None:
    matrix = np.arange(9.0).reshape(3, 3)
    assert offdiagonal(matrix).tolist() == [1, 2, 3, 5, 6, 7]


def test_eval_formula() -> None:
    assert eval_formula(2.5) == 2.5
    assert eval_formula("2*log(N)", N=math.e) == pytest.approx(2.0)
    assert eval_formula("N**2 - sqrt(4)", N=3) == pytest.approx(7.0)
    assert eval_formula("-exp(0)") == -1.0


def test_eval_formula_rejects() -> None:
    for formula in ("__import__('os')", "N.real", "log(", "1/0", "M + 1"):
        with pytest.raises(ConfigError):
            eval_formula(formula, N=4)


def test_version_stamp() -> None:
    stamp = version_stamp()
    assert isinstance(stamp, str)
    assert stamp
