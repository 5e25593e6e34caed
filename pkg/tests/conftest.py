import numpy as np
import pytest

from zermelo import EllipticZermelo, EllipticZermeloParams


def elliptic(a, b, c1, c2, theta="0", name="m"):
    return EllipticZermelo(EllipticZermeloParams(a=a, b=b, c1=c1, c2=c2, theta=theta), name=name)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def general_metric():
    """Elliptic metric with every field depending on t, x and y."""
    return elliptic("2 + 0.5*sin(t + x)", "1.5 + 0.3*cos(y - t)", "0.4*sin(x*y)", "0.3*cos(t)",
                    "0.3*t + 0.2*x", name="general")


@pytest.fixture
def position_only():
    R = "3*arctan(y)"
    alpha = elliptic(R, R, f"(1/2)*{R}", f"(1/2)*{R}", name="alpha")
    beta = elliptic(R, R, f"(1/2)*{R}", f"-(1/2)*{R}", name="beta")
    return alpha, beta


def random_samples(rng, n, t_range=(0.0, 5.0), x_range=(-2.0, 2.0)):
    t = rng.uniform(*t_range, n)
    x = rng.uniform(*x_range, (n, 2))
    v = rng.normal(size=(n, 2))
    return t, x, v
