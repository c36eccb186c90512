"""Planar vehicle model: linear 2-DOF bicycle plus a torque-driven steering column.

Frame convention (ISO 8855): x forward along the road, y to the left, yaw
counter-clockwise. The steering wheel angle ``swa`` is positive when turned
left, so a rightward evasion shows up as negative ``swa``, negative yaw rate and
negative lateral acceleration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

DEFAULT_DT = 1.0 / 120.0


class NonFiniteStateError(ValueError):
    """Raised when a state or input carries NaN/inf."""


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 1500.0
    yaw_inertia: float = 2500.0
    dist_cg_front_axle: float = 1.1
    dist_cg_rear_axle: float = 1.6
    cornering_stiffness_front: float = 80_000.0
    cornering_stiffness_rear: float = 80_000.0
    steering_ratio: float = 16.0
    column_inertia: float = 0.05
    column_damping: float = 0.5
    column_stiffness: float = 1.0
    length: float = 4.5
    width: float = 1.8

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v) or v < 0 or (v == 0 and f.name != "column_stiffness"):
                raise ValueError(f"VehicleParams.{f.name} must be finite and positive, got {v!r}")
        if self.steering_ratio < 1:
            raise ValueError("VehicleParams.steering_ratio must be >= 1")

    @property
    def wheelbase(self) -> float:
        return self.dist_cg_front_axle + self.dist_cg_rear_axle

    @property
    def understeer_gradient(self) -> float:
        """K_us in rad·s²/m (per unit road-wheel angle)."""
        lf, lr = self.dist_cg_front_axle, self.dist_cg_rear_axle
        cf, cr = self.cornering_stiffness_front, self.cornering_stiffness_rear
        return self.mass / self.wheelbase * (lr / cf - lf / cr)


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    vx: float = 30.0 / 3.6
    vy: float = 0.0
    yaw_rate: float = 0.0
    swa: float = 0.0
    swa_rate: float = 0.0

    def check(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise NonFiniteStateError(f"VehicleState.{f.name} is not finite: {v!r}")
        if self.vx <= 0:
            raise ValueError(f"VehicleState.vx must stay positive, got {self.vx!r}")


@dataclass
class SimClock:
    step_index: int = 0
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("SimClock.dt must be > 0")

    @property
    def time(self) -> float:
        return self.step_index * self.dt

    def tick(self) -> float:
        self.step_index += 1
        return self.time


def _derivatives(s, vx, p: VehicleParams, torque):
    # s = (x, y, yaw, vy, r, swa, swa_rate)
    _, _, yaw, vy, r, swa, swa_rate = s
    lf, lr = p.dist_cg_front_axle, p.dist_cg_rear_axle
    delta = swa / p.steering_ratio
    alpha_f = delta - (vy + lf * r) / vx
    alpha_r = -(vy - lr * r) / vx
    fyf = p.cornering_stiffness_front * alpha_f
    fyr = p.cornering_stiffness_rear * alpha_r
    c, sn = math.cos(yaw), math.sin(yaw)
    return (
        vx * c - vy * sn,
        vx * sn + vy * c,
        r,
        (fyf + fyr) / p.mass - vx * r,
        (lf * fyf - lr * fyr) / p.yaw_inertia,
        swa_rate,
        (torque - p.column_damping * swa_rate - p.column_stiffness * swa) / p.column_inertia,
    )


def _as_tuple(state: VehicleState):
    return (state.x, state.y, state.yaw, state.vy, state.yaw_rate, state.swa, state.swa_rate)


def _check_inputs(state, assist_torque, driver_torque, dt):
    state.check()
    for name, v in (("assist_torque", assist_torque), ("driver_torque", driver_torque), ("dt", dt)):
        if not math.isfinite(v):
            raise NonFiniteStateError(f"{name} is not finite: {v!r}")
    if dt <= 0:
        raise ValueError("dt must be > 0")


def state_derivative(state: VehicleState, params: VehicleParams, torque: float) -> VehicleState:
    """Time derivative of every state component (vx derivative is 0)."""
    d = _derivatives(_as_tuple(state), state.vx, params, torque)
    return VehicleState(x=d[0], y=d[1], yaw=d[2], vx=0.0, vy=d[3], yaw_rate=d[4], swa=d[5], swa_rate=d[6])


def step_vehicle(
    state: VehicleState,
    params: VehicleParams,
    assist_torque: float,
    driver_torque: float,
    dt: float = DEFAULT_DT,
) -> VehicleState:
    """Advance the coupled column + bicycle model by one classical RK4 step.

    Both torques act on the steering column and are held constant over the step.
    The longitudinal speed is held by cruise control and never changes.
    """
    _check_inputs(state, assist_torque, driver_torque, dt)
    torque = assist_torque + driver_torque
    vx = state.vx
    s0 = _as_tuple(state)
    f = _derivatives
    k1 = f(s0, vx, params, torque)
    k2 = f(tuple(a + 0.5 * dt * b for a, b in zip(s0, k1)), vx, params, torque)
    k3 = f(tuple(a + 0.5 * dt * b for a, b in zip(s0, k2)), vx, params, torque)
    k4 = f(tuple(a + dt * b for a, b in zip(s0, k3)), vx, params, torque)
    s1 = tuple(
        a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(s0, k1, k2, k3, k4)
    )
    return VehicleState(
        x=s1[0], y=s1[1], yaw=s1[2], vx=vx, vy=s1[3], yaw_rate=s1[4], swa=s1[5], swa_rate=s1[6]
    )


def slip_angle(state: VehicleState) -> float:
    """Vehicle slip angle at the CG in degrees, ``atan(vy / vx)``."""
    if not state.vx > 0:
        raise ValueError(f"slip angle undefined for vx={state.vx!r}")
    return math.degrees(math.atan(state.vy / state.vx))


def lateral_acceleration(state: VehicleState, state_derivative_vy: float, yaw_rate: float) -> float:
    """Body-frame lateral acceleration ``vy_dot + vx * yaw_rate`` (negative in a right turn)."""
    for name, v in (("vx", state.vx), ("state_derivative_vy", state_derivative_vy), ("yaw_rate", yaw_rate)):
        if not math.isfinite(v):
            raise NonFiniteStateError(f"{name} is not finite: {v!r}")
    return state_derivative_vy + state.vx * yaw_rate

