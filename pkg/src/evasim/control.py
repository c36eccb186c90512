"""Two-point preview steering law: PI on near-point lateral error, PD on far-point yaw error.

Sign convention: errors are target minus vehicle in the ISO frame of
:mod:`evasim.dynamics`, so a positive error asks for a leftward (positive)
column torque. A vehicle sitting 1 m left of its target sees ``e_y_near = -1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import VehicleState


class TrajectoryDomainError(ValueError):
    pass


@dataclass(frozen=True)
class ControllerGains:
    a1: float = 0.19
    a2: float = 0.019
    a3: float = 3.8
    a4: float = 0.19
    torque_limit: float = 5.0

    def __post_init__(self):
        if not self.torque_limit > 0:
            raise ValueError("torque_limit must be > 0")

    def scaled(self, factor: float, torque_limit: float | None = None) -> "ControllerGains":
        return ControllerGains(
            a1=self.a1 * factor,
            a2=self.a2 * factor,
            a3=self.a3 * factor,
            a4=self.a4 * factor,
            torque_limit=self.torque_limit if torque_limit is None else torque_limit,
        )


@dataclass(frozen=True)
class PreviewConfig:
    near_distance: float = 6.0
    far_distance: float = 20.0

    def __post_init__(self):
        if not 0 < self.near_distance < self.far_distance:
            raise ValueError("need 0 < near_distance < far_distance")


@dataclass(frozen=True)
class PreviewErrors:
    e_y_near: float
    e_theta_far: float
    e_theta_far_rate: float


@dataclass(frozen=True)
class ControllerState:
    integral_e_y: float = 0.0
    prev_e_theta_far: float | None = None


class TargetTrajectory:
    """Target lateral offset and heading as functions of road station.

    Subclasses implement ``_offset`` and ``_slope``; the road is straight along
    +x so the heading is ``atan(slope)``.
    """

    name = "trajectory"

    def __init__(self, s_min: float, s_max: float):
        if not s_min < s_max:
            raise ValueError("empty trajectory domain")
        self.s_min = s_min
        self.s_max = s_max

    def _check(self, s):
        if not self.s_min <= s <= self.s_max:
            raise TrajectoryDomainError(
                f"station {s:.3f} m outside {self.name} domain [{self.s_min}, {self.s_max}]"
            )

    def offset(self, s: float) -> float:
        self._check(s)
        return self._offset(s)

    def heading(self, s: float) -> float:
        self._check(s)
        return math.atan(self._slope(s))

    def _offset(self, s):
        raise NotImplementedError

    def _slope(self, s):
        raise NotImplementedError


class StraightTrajectory(TargetTrajectory):
    """Constant lateral offset, e.g. the lane-keeping target at a lane centre."""

    name = "lane-keep"

    def __init__(self, lateral_offset: float = 0.0, s_min: float = -1e3, s_max: float = 1e3):
        super().__init__(s_min, s_max)
        self.lateral_offset = lateral_offset

    def _offset(self, s):
        return self.lateral_offset

    def _slope(self, s):
        return 0.0


def preview_points(state: VehicleState, preview: PreviewConfig):
    c, s = math.cos(state.yaw), math.sin(state.yaw)
    near = (state.x + preview.near_distance * c, state.y + preview.near_distance * s)
    far = (state.x + preview.far_distance * c, state.y + preview.far_distance * s)
    return near, far


def preview_errors(
    state: VehicleState,
    traj: TargetTrajectory,
    preview: PreviewConfig,
    prev_e_theta_far: float | None = None,
    dt: float | None = None,
) -> PreviewErrors:
    """Near-point lateral error, far-point yaw error and its backward-difference rate.

    The rate is 0 when there is no previous sample (first step after a reset).
    """
    (nx, ny), (fx, _) = preview_points(state, preview)
    e_y = traj.offset(nx) - ny
    e_theta = traj.heading(fx) - state.yaw
    if prev_e_theta_far is None or dt is None:
        rate = 0.0
    else:
        rate = (e_theta - prev_e_theta_far) / dt
    return PreviewErrors(e_y, e_theta, rate)


def controller_torque(
    errors: PreviewErrors, cstate: ControllerState, gains: ControllerGains, dt: float
) -> tuple[float, ControllerState]:
    """Saturated PI-PD torque with conditional-integration anti-windup.

    The integral is advanced by ``e_y * dt`` before use. If the resulting output
    saturates and the current error pushes further into saturation, the stored
    integral keeps its old value.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    e_y = errors.e_y_near
    integral = cstate.integral_e_y + e_y * dt
    raw = gains.a1 * e_y + gains.a2 * integral + gains.a3 * errors.e_theta_far + gains.a4 * errors.e_theta_far_rate
    if not math.isfinite(raw):
        raise ValueError(f"non-finite controller output from {errors!r}")
    limit = gains.torque_limit
    torque = min(max(raw, -limit), limit)
    if torque != raw and e_y * raw > 0:
        integral = cstate.integral_e_y
    return torque, ControllerState(integral_e_y=integral, prev_e_theta_far=errors.e_theta_far)


def controller_torque_batch(e_y, e_theta, e_theta_rate, integral, gains: ControllerGains, dt: float):
    """Array form of :func:`controller_torque` for many independent controllers.

    Same operation order as the scalar path, so results match it bit for bit.
    Returns ``(torque, new_integral)``.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    e_y = np.asarray(e_y, dtype=float)
    integ = np.asarray(integral, dtype=float) + e_y * dt
    raw = gains.a1 * e_y + gains.a2 * integ + gains.a3 * np.asarray(e_theta, dtype=float) + gains.a4 * np.asarray(
        e_theta_rate, dtype=float
    )
    if not np.all(np.isfinite(raw)):
        raise ValueError("non-finite controller output")
    torque = np.minimum(np.maximum(raw, -gains.torque_limit), gains.torque_limit)
    frozen = (torque != raw) & (e_y * raw > 0)
    return torque, np.where(frozen, np.asarray(integral, dtype=float), integ)


def reset(cstate: ControllerState) -> ControllerState:
    return replace(cstate, integral_e_y=0.0, prev_e_theta_far=None)


class PreviewController:
    """Stateful wrapper used by the trial loop: errors, torque and memory in one call."""

    def __init__(self, gains: ControllerGains, preview: PreviewConfig, dt: float):
        self.gains = gains
        self.preview = preview
        self.dt = dt
        self.state = ControllerState()

    def reset(self):
        self.state = reset(self.state)

    def __call__(self, vehicle: VehicleState, traj: TargetTrajectory) -> float:
        errs = preview_errors(vehicle, traj, self.preview, self.state.prev_e_theta_far, self.dt)
        torque, self.state = controller_torque(errs, self.state, self.gains, self.dt)
        return torque
