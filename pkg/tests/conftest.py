import numpy as np
import pytest

from soppi import CartPole, CartPoleParams, CostSpec, DoubleIntegrator, Pendulum


@pytest.fixture
def cartpole():
    return CartPole()


@pytest.fixture
def double_integrator():
    return DoubleIntegrator(dt=0.1)


@pytest.fixture
def pendulum():
    return Pendulum(mass=1.0, length=1.0, gravity=9.8, dt=0.02)


@pytest.fixture
def cartpole_cost():
    q = np.diag([1.25, 1.0, 12.0, 0.25])
    return CostSpec(Q=q, R=np.array([[1e-3]]), Q_T=10 * q,
                    x_target=np.zeros(4), angle_dims={2})


def central_diff_jacobian(f, x, h=1e-5):
    """Finite-difference Jacobian of a vector function, the test oracle."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)
