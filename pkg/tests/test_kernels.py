import math

import numpy as np
import pytest

from rieszlab.errors import KernelRangeError, SingularEvaluationError
from rieszlab.kernels import (
    RieszKernel,
    SmearedCharge,
    coulomb_constant,
    eval_f_eta,
    eval_g,
    eval_g_eta,
    fractional_constant,
    riesz_constant,
    sphere_area,
    truncation_mass,
    upper_gamma,
)

KERNELS = [(1, -1.0), (1, 0.0), (1, 0.5), (2, 0.0), (2, 1.0), (3, 1.0), (3, 2.0)]


def test_kernel_range() -> None:
    for d, s in KERNELS:
        RieszKernel(d, s)
    for d, s in [(2, 2.0), (2, -0.5), (1, -1.5), (3, 0.5), (0, 0.0)]:
        with pytest.raises(KernelRangeError):
            RieszKernel(d, s)


def test_kernel_values() -> None:
    assert RieszKernel(2, 0).g(math.e) == pytest.approx(-1.0)
    assert RieszKernel(3, 1).g(2.0) == pytest.approx(0.5)
    assert RieszKernel(1, -1).g(3.0) == pytest.approx(-3.0)
    assert RieszKernel(2, 0).is_log and RieszKernel(2, 0).is_coulomb
    assert not RieszKernel(2, 1).is_coulomb


def test_eval_g_singular() -> None:
    with pytest.raises(SingularEvaluationError):
        eval_g(RieszKernel(2, 0), np.zeros(2))
    with pytest.raises(SingularEvaluationError):
        eval_g(RieszKernel(3, 1), np.zeros(3))
    assert eval_g(RieszKernel(1, -1), np.zeros(1)) == 0.0


def test_gradient_matches_finite_differences() -> None:
    x = np.array([[0.3, -0.7], [1.2, 0.4]])
    h = 1e-6
    for s in (0.0, 0.5, 1.5):
        kernel = RieszKernel(2, s)
        grad = kernel.gradient(x)
        for i in range(2):
            e = h * np.eye(2)[i]
            fd = (kernel.value(x + e) - kernel.value(x - e)) / (2 * h)
            assert np.allclose(grad[:, i], fd, rtol=1e-6)


def test_truncation_split_is_exact() -> None:
    x = np.array([[0.05, 0.0], [0.2, 0.1], [1.0, 2.0]])
    for d, s in [(2, 0.0), (2, 1.0)]:
        kernel = RieszKernel(d, s)
        for eta in (0.1, 0.5):
            total = eval_g_eta(kernel, x, eta) + eval_f_eta(kernel, x, eta)
            assert np.allclose(total, eval_g(kernel, x), rtol=1e-14, atol=0)
            assert np.all(eval_f_eta(kernel, x, eta)[np.hypot(*x.T) >= eta] == 0)


def test_truncation_mass() -> None:
    for d, s in [(2, 0.0), (3, 1.0), (2, 1.0)]:
        kernel = RieszKernel(d, s)
        eta = 0.3
        exact = sphere_area(d) * eta ** (d - s) / (d * (d - s))
        assert truncation_mass(kernel, eta) == pytest.approx(exact, rel=1e-8)
    with pytest.raises(ValueError):
        truncation_mass(RieszKernel(2, 0), 0.0)


def test_newton_sphere_property() -> None:
    kernel = RieszKernel(2, 0)
    charge = SmearedCharge((0.1, -0.2), 0.5)
    outside = np.array([[1.1, 0.3], [-0.8, 0.9]])
    expected = eval_g(kernel, outside - np.array([0.1, -0.2]))
    assert np.allclose(charge.potential(kernel, outside), expected, atol=1e-8)
    inside = np.array([0.2, -0.1])
    assert charge.potential(kernel, inside) == pytest.approx(-math.log(0.5), abs=1e-8)

    kernel3 = RieszKernel(3, 1)
    shell = SmearedCharge((0.0, 0.0, 0.0), 0.5)
    far = np.array([0.0, 0.6, 1.4])
    assert shell.potential(kernel3, far, order=64) == pytest.approx(
        1 / np.linalg.norm(far), abs=1e-8
    )
    assert shell.potential(kernel3, [0.1, 0.0, 0.0], order=64) == pytest.approx(
        2.0, abs=1e-8
    )


def test_constants() -> None:
    assert coulomb_constant(2) == pytest.approx(2 * math.pi)
    assert coulomb_constant(3) == pytest.approx(4 * math.pi)
    assert riesz_constant(1, 0) == pytest.approx(2 * math.pi)
    assert riesz_constant(1, -1) == 2.0
    assert riesz_constant(3, 1) == pytest.approx(4 * math.pi)
    assert riesz_constant(1, 0.5) == pytest.approx(math.sqrt(2 * math.pi))
    assert fractional_constant(3, 1) == pytest.approx(riesz_constant(3, 1))
    assert fractional_constant(2, 0) == pytest.approx(2 * math.pi)
    assert fractional_constant(1, 0.5) == pytest.approx(riesz_constant(1, 0.5) / 0.5)


def test_upper_gamma() -> None:
    assert upper_gamma(1.0, 2.0) == pytest.approx(math.exp(-2.0))
    assert upper_gamma(0.0, 1.0) == pytest.approx(0.21938393439552, rel=1e-12)
    z = np.array([0.3, 1.0, 4.0])
    for a in (-0.5, -1.5):
        recurrence = a * upper_gamma(a, z) + z**a * np.exp(-z)
        assert np.allclose(upper_gamma(a + 1, z), recurrence, rtol=1e-12)
