"""The frozen constants in ``oracles`` agree with their derivations."""

import math
from fractions import Fraction

import numpy as np
import pytest

import oracles as O


def test_scalar_constants():
    assert O.EXP_SIN_1 == math.exp(math.sin(1.0))
    assert O.TANH_1 == math.tanh(1.0)
    assert O.XAVIER_5_128 == math.sqrt(6.0 / (5 + 128))
    assert math.isclose(O.KERNEL_SQRT2, math.exp(-(math.sqrt(2.0) ** 2) / 2.0), rel_tol=1e-15)
    assert O.ADAM_FIRST_STEP == -1e-4 * 1.0 / (1.0 + 1e-8)
    assert O.VANILLA_HALF_LG == math.log(0.5)
    assert O.VANILLA_HALF_LD == -2.0 * math.log(0.5)


def test_penalty_gradient_by_differences():
    def pen(w1, w2=4.0):
        return (math.hypot(w1, w2) - 1.0) ** 2

    assert O.fd1(pen, 3.0, 1e-6) == pytest.approx(O.PENALTY_GRAD_W1, rel=1e-8)


def test_induced_f_hand_values():
    # u = x^2, k = 1: -(1/10)(0 * 2x + 1 * 2); k = x at x = 1: -(1/10)(1 * 2 + 1 * 2)
    assert -0.1 * (0 * 2 + 1 * 2) == pytest.approx(O.INDUCED_F_QUADRATIC, abs=1e-15)
    assert -0.1 * (1 * 2 * 1 + 1 * 2) == pytest.approx(O.INDUCED_F_PRODUCT_AT_1, abs=1e-15)


def test_halton_constants():
    assert tuple(O.radical_inverse_exact(i, 2) for i in (1, 2, 3, 4)) == O.HALTON_BASE2_START
    assert (O.radical_inverse_exact(2, 2), O.radical_inverse_exact(2, 3)) == O.HALTON_2_DIM2
    assert O.radical_inverse_exact(5, 3) == Fraction(7, 9)


def test_w1_brute_force_example():
    assert O.w1_brute([[0.0], [1.0]], [[1.0], [2.0]]) == O.W1_1D_EXAMPLE


def test_quantile_oracle():
    assert O.norm_ppf_bisect(0.5) == pytest.approx(0.0, abs=1e-15)
    assert O.norm_ppf_bisect(0.975) == pytest.approx(1.959963984540054, abs=1e-13)


def test_dense_solver_reproduces_quadratic_exactly():
    # the stencil is exact on quadratics
    x = np.linspace(-1, 1, 21)
    u = O.dense_fd_solve(np.ones_like(x), np.ones_like(x))
    np.testing.assert_allclose(u, O.u_quadratic(x), atol=1e-12)
