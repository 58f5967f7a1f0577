import math

import numpy as np
import pytest

from gamechain.expr import ExpressionError, compile_expr, compile_matrix, compile_vector


def test_scalar_expression_matches_numpy():
    f = compile_expr("0.4 + 0.2*tanh(x)", 1)
    x = np.linspace(-3, 3, 7)[:, None]
    assert np.allclose(f(x), 0.4 + 0.2 * np.tanh(x[:, 0]))


def test_indexed_variables_and_pi():
    f = compile_expr("x0*x1 - sin(pi*x1)/2", 2)
    x = np.array([[1.0, 0.5], [2.0, -1.0]])
    assert np.allclose(f(x), x[:, 0] * x[:, 1] - np.sin(math.pi * x[:, 1]) / 2)


def test_exp_argument_is_clamped():
    f = compile_expr("exp(x)", 1)
    assert math.isfinite(float(f(np.array([[1e6]]))[0]))


@pytest.mark.parametrize("src", ["__import__('os')", "x**2", "y", "open('f')", "x0.real",
                                 "[1]", "lambda: 1", "x2"])
def test_rejects_outside_grammar(src):
    with pytest.raises(ExpressionError):
        compile_expr(src, 2)


def test_matrix_and_vector_shapes():
    s = compile_matrix([["1", "0"], ["x0", "2"]], 2)
    b = compile_vector(["x1", "-1"], 2)
    x = np.zeros((5, 2))
    assert s(x).shape == (5, 2, 2)
    assert b(x).shape == (5, 2)
    with pytest.raises(ExpressionError):
        compile_matrix([["1"]], 2)
