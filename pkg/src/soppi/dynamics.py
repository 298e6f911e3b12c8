"""Discrete-time dynamics with exact control Jacobians.

Every system integrates with semi-implicit Euler (velocities first), which is
stable at the 0.02 s step used by the cart-pole benchmark.  The per-component
step functions are written against :mod:`soppi.dualdiff` primitives so the
same code path serves three callers:

* plain floats and numpy batches of shape ``(..., n)`` for rollouts,
* :class:`~soppi.dualdiff.Dual` inputs for exact forward-mode Jacobians.

Hand-derived closed-form control Jacobians are provided for the hot loop and
are required to agree with the dual-number path (tested).

States and controls are plain numpy float vectors.  Cart-pole state order is
``(x [m], x_dot [m/s], theta [rad], theta_dot [rad/s])`` with ``theta = 0``
upright; the control is the horizontal force on the cart in newtons.  Angles
are never wrapped here — wrapping belongs to costs and metrics only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dualdiff import Dual, clip, cos, sign, sin


@dataclass(frozen=True)
class Jacobians:
    """Partial derivatives of the one-step map.

    d_next_d_state is n x n, d_next_d_control is n x m.
    """

    d_next_d_state: np.ndarray
    d_next_d_control: np.ndarray


@dataclass(frozen=True)
class CartPoleParams:
    """Physical parameters of the cart-pole (Florian-style model).

    Friction coefficients default to zero; the force clamp is off unless
    ``force_limit`` is set.
    """

    cart_mass: float = 1.0
    pole_mass: float = 0.1
    pole_half_length: float = 0.5
    gravity: float = 9.8
    dt: float = 0.02
    force_limit: float | None = None
    cart_friction: float = 0.0
    pole_friction: float = 0.0

    def __post_init__(self):
        if self.cart_mass <= 0 or self.pole_mass <= 0:
            raise ValueError("masses must be strictly positive")
        if self.pole_half_length <= 0:
            raise ValueError("pole_half_length must be strictly positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def _check(system, state, control):
    state = np.asarray(state, dtype=float)
    control = np.asarray(control, dtype=float)
    if state.shape[-1] != system.state_dim:
        raise ValueError(
            f"state dimension {state.shape[-1]} != {system.state_dim}")
    if control.shape[-1] != system.control_dim:
        raise ValueError(
            f"control dimension {control.shape[-1]} != {system.control_dim}")
    if not np.all(np.isfinite(state)) or not np.all(np.isfinite(control)):
        raise ValueError("non-finite (NaN/inf) entries in state or control")
    return state, control


class System:
    """Base class: a pure one-step map with exact Jacobians."""

    state_dim: int
    control_dim: int
    dt: float

    def _step_components(self, s, u):
        """Next-state components from unpacked state/control components."""
        raise NotImplementedError

    def step(self, state, control):
        """One semi-implicit Euler step.  Accepts ``(..., n)`` batches."""
        state, control = _check(self, state, control)
        s = [state[..., i] for i in range(self.state_dim)]
        u = [control[..., j] for j in range(self.control_dim)]
        return np.stack(self._step_components(s, u), axis=-1)

    def step_unchecked(self, state, control):
        """As :meth:`step` but without finiteness/shape validation.

        Hot-loop variant for batched rollouts where divergence is detected
        downstream (non-finite costs are mapped to +inf by the controller).
        """
        s = [state[..., i] for i in range(self.state_dim)]
        u = [control[..., j] for j in range(self.control_dim)]
        return np.stack(self._step_components(s, u), axis=-1)

    def jacobians(self, state, control) -> Jacobians:
        """Exact Jacobians of :meth:`step` via forward-mode dual numbers."""
        state, control = _check(self, state, control)
        if state.ndim != 1:
            raise ValueError("jacobians expects a single (unbatched) point")
        n, m = self.state_dim, self.control_dim
        s = [Dual.seed(state, i, n + m) for i in range(n)]
        u = [Dual(control[j], np.eye(n + m)[n + j]) for j in range(m)]
        out = self._step_components(s, u)
        rows = [o.deriv if isinstance(o, Dual) else np.zeros(n + m) for o in out]
        jac = np.stack(rows)
        return Jacobians(jac[:, :n].copy(), jac[:, n:].copy())

    def control_jacobian(self, state, control):
        """Batched d(next state)/d(control), shape ``(..., n, m)``.

        Subclasses override with a closed form; the default falls back to the
        dual-number path point by point and is only suitable for tests.
        """
        state = np.asarray(state, dtype=float)
        control = np.asarray(control, dtype=float)
        if state.ndim == 1:
            return self.jacobians(state, control).d_next_d_control
        flat_s = state.reshape(-1, self.state_dim)
        flat_u = control.reshape(-1, self.control_dim)
        out = np.stack([self.jacobians(s, u).d_next_d_control
                        for s, u in zip(flat_s, flat_u)])
        return out.reshape(state.shape[:-1] + (self.state_dim, self.control_dim))


class CartPole(System):
    """Cart-pole with the Florian accelerations and semi-implicit Euler.

    theta is measured from the upright position; positive force pushes the
    cart in +x.
    """

    state_dim = 4
    control_dim = 1

    def __init__(self, params: CartPoleParams = CartPoleParams()):
        self.params = params
        self.dt = params.dt

    def _step_components(self, s, u):
        p = self.params
        x, xd, th, thd = s
        force = u[0]
        if p.force_limit is not None:
            force = clip(force, -p.force_limit, p.force_limit)
        mt = p.cart_mass + p.pole_mass
        half = p.pole_half_length
        st, ct = sin(th), cos(th)
        temp = (force + p.pole_mass * half * thd * thd * st
                - p.cart_friction * sign(xd)) / mt
        th_acc = (p.gravity * st - ct * temp
                  - p.pole_friction * thd / (p.pole_mass * half)) / (
            half * (4.0 / 3.0 - p.pole_mass * ct * ct / mt))
        x_acc = temp - p.pole_mass * half * th_acc * ct / mt
        xd2 = xd + x_acc * p.dt
        thd2 = thd + th_acc * p.dt
        return (x + xd2 * p.dt, xd2, th + thd2 * p.dt, thd2)

    def control_jacobian(self, state, control):
        # Closed form: only the accelerations depend on the force, linearly.
        p = self.params
        state = np.asarray(state, dtype=float)
        control = np.asarray(control, dtype=float)
        th = state[..., 2]
        ct = np.cos(th)
        mt = p.cart_mass + p.pole_mass
        half = p.pole_half_length
        d_temp = np.full_like(th, 1.0 / mt)
        if p.force_limit is not None:
            saturated = np.abs(control[..., 0]) > p.force_limit
            d_temp = np.where(saturated, 0.0, d_temp)
        denom = half * (4.0 / 3.0 - p.pole_mass * ct * ct / mt)
        d_th_acc = -ct * d_temp / denom
        d_x_acc = d_temp - p.pole_mass * half * d_th_acc * ct / mt
        dt = p.dt
        cols = np.stack([d_x_acc * dt * dt, d_x_acc * dt,
                         d_th_acc * dt * dt, d_th_acc * dt], axis=-1)
        return cols[..., None]


class DoubleIntegrator(System):
    """1-D point mass: velocity then position update, control is acceleration."""

    state_dim = 2
    control_dim = 1

    def __init__(self, dt: float = 0.02):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.dt = dt

    def _step_components(self, s, u):
        x, v = s
        v2 = v + u[0] * self.dt
        return (x + v2 * self.dt, v2)

    def control_jacobian(self, state, control):
        state = np.asarray(state, dtype=float)
        b = np.array([[self.dt * self.dt], [self.dt]])
        return np.broadcast_to(b, state.shape[:-1] + (2, 1)).copy()


class Pendulum(System):
    """Damped pendulum, theta = 0 hanging down; control is a torque."""

    state_dim = 2
    control_dim = 1

    def __init__(self, mass=1.0, length=1.0, gravity=9.8, damping=0.0,
                 dt=0.02):
        if mass <= 0 or length <= 0:
            raise ValueError("mass and length must be strictly positive")
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.mass = mass
        self.length = length
        self.gravity = gravity
        self.damping = damping
        self.dt = dt

    def _step_components(self, s, u):
        th, om = s
        acc = (-(self.gravity / self.length) * sin(th)
               - self.damping * om
               + u[0] / (self.mass * self.length ** 2))
        om2 = om + acc * self.dt
        return (th + om2 * self.dt, om2)

    def control_jacobian(self, state, control):
        state = np.asarray(state, dtype=float)
        g = self.dt / (self.mass * self.length ** 2)
        b = np.array([[g * self.dt], [g]])
        return np.broadcast_to(b, state.shape[:-1] + (2, 1)).copy()


def step(system: System, state, control):
    """Functional alias for ``system.step``."""
    return system.step(state, control)


def jacobians(system: System, state, control) -> Jacobians:
    """Functional alias for ``system.jacobians``."""
    return system.jacobians(state, control)


def rollout(system: System, x0, controls, length: int | None = None):
    """Roll the system forward; returns ``(N+1, n)`` states including x0."""
    controls = np.asarray(controls, dtype=float)
    if controls.ndim == 1:
        controls = controls[:, None]
    n_steps = controls.shape[0]
    if length is not None and length != n_steps:
        raise ValueError(f"controls length {n_steps} != requested length {length}")
    if n_steps < 1:
        raise ValueError("rollout needs at least one control")
    states = np.empty((n_steps + 1, system.state_dim))
    states[0] = np.asarray(x0, dtype=float)
    for t in range(n_steps):
        states[t + 1] = system.step(states[t], controls[t])
    return states


_SYSTEMS = {
    "cartpole": lambda params: CartPole(CartPoleParams(**params)),
    "double_integrator": lambda params: DoubleIntegrator(**params),
    "pendulum": lambda params: Pendulum(**params),
}


def make_system(system_id: str, params: dict | None = None) -> System:
    """Build a system from its config id and parameter dict."""
    if system_id not in _SYSTEMS:
        raise ValueError(f"unknown system {system_id!r}; "
                         f"known: {sorted(_SYSTEMS)}")
    return _SYSTEMS[system_id](dict(params or {}))
