"""A small library of ready-made motion and measurement models.

Every builder takes a plain params dict so configurations can come straight
from a scenario file.  Variance parameters are named ``var_*`` and are
covariance entries, not standard deviations.
"""

from __future__ import annotations

import numpy as np

from .statespace import (
    LinearStateSpace,
    NonlinearMeasurementModel,
    NonlinearSystemModel,
)

__all__ = ["model_library"]


def _require(params: dict, key: str, name: str):
    if key not in params:
        raise ValueError(f"model '{name}' requires parameter '{key}'")
    return params[key]


def _constant_position(params):
    var_p = float(_require(params, "var_p", "cp"))
    return LinearStateSpace(A=[[1.0]], B=[[1.0]], sigma_u=[[var_p]])


def _constant_velocity(params):
    dt = float(_require(params, "dt", "cv"))
    var_v = float(_require(params, "var_v", "cv"))
    return LinearStateSpace(
        A=[[1.0, dt], [0.0, 1.0]],
        B=[[0.0], [1.0]],
        sigma_u=[[var_v]],
    )


def _constant_acceleration(params):
    dt = float(_require(params, "dt", "ca"))
    var_a = float(_require(params, "var_a", "ca"))
    return LinearStateSpace(
        A=[[1.0, dt, 0.5 * dt * dt], [0.0, 1.0, dt], [0.0, 0.0, 1.0]],
        B=[[0.0], [0.0], [1.0]],
        sigma_u=[[var_a]],
    )


def _unified_kinematic(params):
    # Shared 3-state (position, velocity, acceleration) form whose per-channel
    # control noise recovers the cp/cv/ca members; this is what lets a model
    # bank mix them in one state space.
    dt = float(_require(params, "dt", "unified"))
    var_p = float(_require(params, "var_p", "unified"))
    var_v = float(_require(params, "var_v", "unified"))
    var_a = float(_require(params, "var_a", "unified"))
    return LinearStateSpace(
        A=[[1.0, dt, 0.5 * dt * dt], [0.0, 1.0, dt], [0.0, 0.0, 1.0]],
        B=np.eye(3),
        sigma_u=np.diag([var_p, var_v, var_a]),
    )


def _bicycle(params):
    """Planar kinematic bicycle: state (x, y, heading, steering angle).

    Controls are (speed, commanded steering); the actual steering angle tracks
    the command through a first-order lag with time constant tau_beta.
    """
    dt = float(_require(params, "dt", "bicycle"))
    length = float(_require(params, "L", "bicycle"))
    tau = float(_require(params, "tau_beta", "bicycle"))
    control_cov = np.asarray(params.get("control_cov", np.zeros((2, 2))), dtype=float)

    def g(x, u):
        px, py, heading, beta = x
        v, beta_cmd = u
        return np.array([
            px + dt * v * np.cos(heading),
            py + dt * v * np.sin(heading),
            heading + dt * (v / length) * np.tan(beta),
            beta + dt * (beta_cmd - beta) / tau,
        ])

    def jac_x(x, u):
        _, _, heading, beta = x
        v = u[0]
        j = np.eye(4)
        j[0, 2] = -dt * v * np.sin(heading)
        j[1, 2] = dt * v * np.cos(heading)
        j[2, 3] = dt * (v / length) / np.cos(beta) ** 2
        j[3, 3] = 1.0 - dt / tau
        return j

    def jac_u(x, u):
        _, _, heading, beta = x
        return np.array([
            [dt * np.cos(heading), 0.0],
            [dt * np.sin(heading), 0.0],
            [dt * np.tan(beta) / length, 0.0],
            [0.0, dt / tau],
        ])

    return NonlinearSystemModel(g=g, jac_x=jac_x, jac_u=jac_u, sigma_u=control_cov)


def _reduced_bicycle(params):
    """Bicycle with instantaneous steering: state (x, y, heading), controls (v, beta)."""
    dt = float(_require(params, "dt", "reduced_bicycle"))
    length = float(_require(params, "L", "reduced_bicycle"))
    control_cov = np.asarray(params.get("control_cov", np.zeros((2, 2))), dtype=float)

    def g(x, u):
        px, py, heading = x
        v, beta = u
        return np.array([
            px + dt * v * np.cos(heading),
            py + dt * v * np.sin(heading),
            heading + dt * (v / length) * np.tan(beta),
        ])

    def jac_x(x, u):
        heading = x[2]
        v = u[0]
        j = np.eye(3)
        j[0, 2] = -dt * v * np.sin(heading)
        j[1, 2] = dt * v * np.cos(heading)
        return j

    def jac_u(x, u):
        heading = x[2]
        v, beta = u
        return np.array([
            [dt * np.cos(heading), 0.0],
            [dt * np.sin(heading), 0.0],
            [dt * np.tan(beta) / length, dt * (v / length) / np.cos(beta) ** 2],
        ])

    return NonlinearSystemModel(g=g, jac_x=jac_x, jac_u=jac_u, sigma_u=control_cov)


def _lateral(params):
    # Small-angle lateral dynamics at constant speed: state (lateral offset,
    # heading, steering angle).  Only the steering command drives the system,
    # through the same first-order lag as the full bicycle.
    v = float(_require(params, "v", "lateral"))
    length = float(_require(params, "L", "lateral"))
    tau = float(_require(params, "tau_beta", "lateral"))
    var_u = float(params.get("var_u", 0.0))
    return LinearStateSpace(
        A=[[0.0, v, 0.0], [0.0, 0.0, v / length], [0.0, 0.0, -1.0 / tau]],
        B=[[0.0], [0.0], [1.0 / tau]],
        sigma_u=[[var_u]],
    )


def _double_inverted_pendulum(params):
    """Linearized double pendulum on a cart.

    State ordering (angle1, rate1, angle2, rate2, cart position, cart speed).
    Only the dynamics matrix matters for the observability analyses this model
    feeds; no actuation column is modelled.
    """
    m1 = float(_require(params, "m1", "dip"))
    m2 = float(_require(params, "m2", "dip"))
    l1 = float(_require(params, "L1", "dip"))
    l2 = float(_require(params, "L2", "dip"))
    g = float(_require(params, "g", "dip"))
    ratio = m2 / m1
    a = np.zeros((6, 6))
    a[0, 1] = 1.0
    a[1, 0] = (1.0 + ratio) * g / l1
    a[1, 2] = -ratio * g / l1
    a[2, 3] = 1.0
    a[3, 0] = -(1.0 + ratio) * g / l2
    a[3, 2] = (1.0 + ratio) * g / l2
    a[4, 5] = 1.0
    return LinearStateSpace(A=a, B=np.zeros((6, 1)), sigma_u=[[0.0]])


def _single_inverted_pendulum(params):
    # Linearized pendulum on a cart, state (angle, angular rate, position,
    # speed), control = cart acceleration.
    g = float(_require(params, "g", "sip"))
    length = float(_require(params, "L", "sip"))
    var_u = float(params.get("var_u", 0.0))
    return LinearStateSpace(
        A=[[0.0, 1.0, 0.0, 0.0],
           [g / length, 0.0, 0.0, 0.0],
           [0.0, 0.0, 0.0, 1.0],
           [0.0, 0.0, 0.0, 0.0]],
        B=[[0.0], [-1.0 / length], [0.0], [1.0]],
        sigma_u=[[var_u]],
    )


def _landmark_range(params):
    """Range to a fixed landmark, for planar states whose first two entries are (x, y)."""
    x_l = float(_require(params, "x_l", "landmark_range"))
    y_l = float(_require(params, "y_l", "landmark_range"))
    var_r = float(_require(params, "var_r", "landmark_range"))

    def h(x):
        return np.array([np.hypot(x[0] - x_l, x[1] - y_l)])

    def jac(x):
        r = np.hypot(x[0] - x_l, x[1] - y_l)
        if r < 1e-12:
            raise ValueError("range Jacobian is undefined at the landmark position")
        row = np.zeros(len(x))
        row[0] = (x[0] - x_l) / r
        row[1] = (x[1] - y_l) / r
        return row.reshape(1, -1)

    return NonlinearMeasurementModel(h=h, jac=jac, sigma_z=[[var_r]])


_BUILDERS = {
    "cp": _constant_position,
    "cv": _constant_velocity,
    "ca": _constant_acceleration,
    "unified": _unified_kinematic,
    "bicycle": _bicycle,
    "reduced_bicycle": _reduced_bicycle,
    "lateral": _lateral,
    "dip": _double_inverted_pendulum,
    "sip": _single_inverted_pendulum,
    "landmark_range": _landmark_range,
}


def model_library(name: str, params: dict | None = None):
    """Build a named model from a parameter dict.

    Available names: cp, cv, ca, unified, bicycle, reduced_bicycle, lateral,
    dip, sip, landmark_range.
    """
    if name not in _BUILDERS:
        raise ValueError(
            f"unknown model '{name}'; available: {', '.join(sorted(_BUILDERS))}"
        )
    return _BUILDERS[name](params or {})
