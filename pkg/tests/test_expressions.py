import math

import numpy as np
import pytest

from zermelo.expressions import Expr, ExpressionError


def test_value_and_caret_power():
    f = Expr("1 + t + x^2 + y**2")
    assert f.value(0.5, 1.0, 2.0) == pytest.approx(6.5)
    assert f.variables == {"t", "x", "y"}


def test_constants_are_floats():
    f = Expr("(3/2)*cos(pi/10)")
    assert f.is_constant
    v, ft, fx, fy = f.value_and_grad(0.0, 0.0, 0.0)
    assert v == pytest.approx(1.5 * math.cos(math.pi / 10))
    assert (ft, fx, fy) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("src", [
    "3*arctan(y)", "2 + (1/2)*sin(t)", "-cos(t*pi/4)", "1/(2 + cos(x))", "(x - y)^3 / (1 + t*t)",
    "sin(x*y)*cos(t - y)", "-(-x)",
])
def test_gradients_match_central_differences(src):
    f = Expr(src)
    rng = np.random.default_rng(3)
    t, x, y = rng.uniform(0.2, 1.5, 3)
    _, ft, fx, fy = f.value_and_grad(t, x, y)
    h = 1e-6
    num = [
        (f.value(t + h, x, y) - f.value(t - h, x, y)) / (2 * h),
        (f.value(t, x + h, y) - f.value(t, x - h, y)) / (2 * h),
        (f.value(t, x, y + h) - f.value(t, x, y - h)) / (2 * h),
    ]
    assert np.allclose([ft, fx, fy], num, atol=1e-7)


def test_vectorized_evaluation():
    f = Expr("x*y + t")
    x = np.linspace(0, 1, 5)
    assert np.allclose(f.value(1.0, x, 2 * x), 2 * x * x + 1)


@pytest.mark.parametrize("src", ["z + 1", "exp(x)", "x ** y", "x.real", "[1, 2]", "x if t else y", "x <", "True",
                                 "sin(x, y)", "'a'"])
def test_rejects_text_outside_the_grammar(src):
    with pytest.raises(ExpressionError):
        Expr(src)


def test_dependency_flags():
    assert Expr("1 + t").depends_on_time and not Expr("1 + t").depends_on_position
    assert Expr("y").depends_on_position
    assert Expr(2.5).is_constant
