"""Road world: two-lane straight road, parked occluding car, running pedestrian.

Layout (ISO frame, metres): the ego car starts at x = 0 on the left-lane centre
(y = 0); the right-lane centre is at y = -lane_width. The pedestrian appears at
the crossing line x = crossing_x, ``pedestrian_start_offset`` to the left of the
left-lane centre, just in front of a car parked on the left shoulder, and runs
rightward until it reaches y = 0 where it stops for good.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .control import TargetTrajectory
from .dynamics import DEFAULT_DT, VehicleParams, VehicleState


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle given by its centre and full extents."""

    cx: float
    cy: float
    length: float
    width: float

    @property
    def bounds(self):
        hl, hw = self.length / 2, self.width / 2
        return self.cx - hl, self.cx + hl, self.cy - hw, self.cy + hw


@dataclass(frozen=True)
class ScenarioConfig:
    lane_width: float = 3.5
    vehicle_speed: float = 30.0 / 3.6
    pedestrian_speed: float = 8.34
    ttc_at_event: float = 4.6
    crosswalk: bool = False
    pedestrian_present: bool = True
    road_length: float = 120.0
    pre_event_cruise: float = 5.0
    pedestrian_start_offset: float = 2.0
    parked_length: float = 4.5
    parked_width: float = 1.8
    parked_gap: float = 0.3
    parked_clearance: float = 0.1
    avoidance_length: float = 25.0
    dt: float = DEFAULT_DT

    def validate(self, vehicle: VehicleParams | None = None) -> None:
        vehicle = vehicle or VehicleParams()
        if not self.ttc_at_event > 0:
            raise ScenarioError("ttc_at_event must be > 0")
        if not (self.vehicle_speed > 0 and self.pedestrian_speed > 0):
            raise ScenarioError("speeds must be > 0")
        if not self.lane_width > vehicle.width:
            raise ScenarioError("lane_width must exceed the vehicle width")
        if not (self.dt > 0 and self.pre_event_cruise >= 0 and self.avoidance_length > 0):
            raise ScenarioError("dt, pre_event_cruise and avoidance_length must be positive")
        if self.crossing_x(vehicle) >= self.road_length:
            raise ScenarioError(
                f"pedestrian crossing line at {self.crossing_x(vehicle):.2f} m lies beyond the "
                f"{self.road_length} m road"
            )

    def event_step(self) -> int:
        return round(self.pre_event_cruise / self.dt)

    def event_time(self) -> float:
        return self.event_step() * self.dt

    def crossing_x(self, vehicle: VehicleParams | None = None) -> float:
        """Station of the pedestrian's crossing line.

        Chosen so that at the spawn instant the gap from the car's front bumper to
        the line, divided by the cruise speed, equals ``ttc_at_event``.
        """
        vehicle = vehicle or VehicleParams()
        v = self.vehicle_speed
        return v * self.event_time() + vehicle.length / 2 + v * self.ttc_at_event

    def parked_vehicle(self, vehicle: VehicleParams | None = None) -> Rect:
        xc = self.crossing_x(vehicle)
        cx = xc - self.parked_gap - self.parked_length / 2
        cy = self.lane_width / 2 + self.parked_clearance + self.parked_width / 2
        return Rect(cx, cy, self.parked_length, self.parked_width)


@dataclass(frozen=True)
class WorldState:
    config: ScenarioConfig
    vehicle_params: VehicleParams
    time: float
    vehicle: VehicleState
    pedestrian_position: tuple[float, float] | None = None
    pedestrian_visible: bool = False
    event_time: float | None = None
    visible_since: float | None = None

    @property
    def step_index(self) -> int:
        return round(self.time / self.config.dt)


def build_world(config: ScenarioConfig, vehicle_params: VehicleParams | None = None) -> WorldState:
    vehicle_params = vehicle_params or VehicleParams()
    config.validate(vehicle_params)
    vehicle = VehicleState(x=0.0, y=0.0, yaw=0.0, vx=config.vehicle_speed)
    event = config.event_time() if config.pedestrian_present else None
    return WorldState(config=config, vehicle_params=vehicle_params, time=0.0, vehicle=vehicle, event_time=event)


def pedestrian_position_at(config: ScenarioConfig, elapsed: float, vehicle: VehicleParams | None = None):
    """Pedestrian position ``elapsed`` seconds after spawn (None before spawn)."""
    if elapsed < 0:
        return None
    y = max(config.pedestrian_start_offset - config.pedestrian_speed * elapsed, 0.0)
    return (config.crossing_x(vehicle), y)


def step_pedestrian(world: WorldState, dt: float | None = None) -> WorldState:
    """Advance world time by ``dt`` and move the pedestrian along its straight run.

    Position is evaluated from the elapsed time since spawn, so any split of the
    same total time lands on the same point.
    """
    dt = world.config.dt if dt is None else dt
    t = world.time + dt
    pos = None
    if world.event_time is not None:
        pos = pedestrian_position_at(world.config, t - world.event_time, world.vehicle_params)
    w = replace(world, time=t, pedestrian_position=pos)
    return update_visibility(w)


def update_visibility(world: WorldState) -> WorldState:
    if world.pedestrian_position is None:
        return replace(world, pedestrian_visible=False)
    vis = visibility(world)
    since = world.visible_since
    if vis and since is None:
        since = world.time
    return replace(world, pedestrian_visible=vis, visible_since=since)


def _segment_hits_open_rect(p0, p1, rect: Rect) -> bool:
    # Liang-Barsky clip against the open rectangle; touching the boundary is not a hit.
    x0, y0 = p0
    dx, dy = p1[0] - x0, p1[1] - y0
    xmin, xmax, ymin, ymax = rect.bounds
    t_in, t_out = 0.0, 1.0
    for p, q in ((-dx, x0 - xmin), (dx, xmax - x0), (-dy, y0 - ymin), (dy, ymax - y0)):
        if p == 0:
            if q <= 0:
                return False
            continue
        t = q / p
        if p < 0:
            t_in = max(t_in, t)
        else:
            t_out = min(t_out, t)
        if t_in >= t_out:
            return False
    return t_in < t_out


def visibility(world: WorldState) -> bool:
    """True when the CG-to-pedestrian sightline clears the parked car's interior."""
    if world.pedestrian_position is None:
        raise ScenarioError("no pedestrian in the world")
    cg = (world.vehicle.x, world.vehicle.y)
    rect = world.config.parked_vehicle(world.vehicle_params)
    return not _segment_hits_open_rect(cg, world.pedestrian_position, rect)


def point_to_vehicle_distance(vehicle: VehicleState, params: VehicleParams, point) -> float:
    """Distance from ``point`` to the ego footprint (a rectangle centred on the CG)."""
    dx, dy = point[0] - vehicle.x, point[1] - vehicle.y
    c, s = math.cos(vehicle.yaw), math.sin(vehicle.yaw)
    lon = c * dx + s * dy
    lat = -s * dx + c * dy
    ox = max(abs(lon) - params.length / 2, 0.0)
    oy = max(abs(lat) - params.width / 2, 0.0)
    return math.hypot(ox, oy)


def vehicle_pedestrian_distance(world: WorldState) -> float:
    if world.pedestrian_position is None:
        raise ScenarioError("no pedestrian in the world")
    return point_to_vehicle_distance(world.vehicle, world.vehicle_params, world.pedestrian_position)


def front_station(vehicle: VehicleState, params: VehicleParams) -> float:
    return vehicle.x + params.length / 2 * math.cos(vehicle.yaw)


class AvoidancePath(TargetTrajectory):
    """Quintic lane change from offset 0 to ``-lane_width``.

    Offset, slope and curvature are continuous at both ends; the path is flat
    before ``start`` and holds the right-lane centre after ``start + length``.
    """

    name = "avoidance"

    def __init__(self, start: float, length: float, lane_width: float, s_min: float = -1e3, s_max: float = 1e3):
        if not length > 0:
            raise ValueError("transition length must be > 0")
        super().__init__(s_min, s_max)
        self.start = start
        self.length = length
        self.lane_width = lane_width

    def _tau(self, s):
        return min(max((s - self.start) / self.length, 0.0), 1.0)

    def _offset(self, s):
        t = self._tau(s)
        return -self.lane_width * t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)

    def _slope(self, s):
        t = self._tau(s)
        return -self.lane_width * 30.0 * t * t * (1.0 - t) ** 2 / self.length

    def curvature(self, s: float) -> float:
        self._check(s)
        t = self._tau(s)
        return -self.lane_width * 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / self.length**2
