"""Steering-interface policies for the three interfaces plus simulated subjects.

* Myo armband: automation keeps the lane; a latched trigger (perception +
  reaction + device latency) switches the assist to the avoidance path.
* Steering wheel: the subject steers by hand for the whole trial.
* Manual takeover: automation until the pedestrian starts running, then the
  assist is cut and the subject steers after an extra re-engagement delay.

Human steering reuses the two-point preview law with inflated gains and a larger
torque cap. Humans plan their own lane change relative to the
pedestrian's crossing line: the planned transition covers a fixed fraction of the
remaining gap (bounded to ``[min, max]``), so late reactions steer more abruptly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .control import ControllerGains, PreviewConfig, PreviewController, StraightTrajectory, TargetTrajectory
from .scenario import AvoidancePath, WorldState, front_station


class Interface(enum.Enum):
    MYO_ARMBAND = "myo"
    STEERING_WHEEL = "wheel"
    MANUAL_TAKEOVER = "takeover"

    @property
    def label(self) -> str:
        return {"myo": "Myo Armband", "wheel": "Steering Wheel", "takeover": "Manual Takeover"}[self.value]


class Phase(enum.Enum):
    AUTOMATION = "automation"
    MANUAL = "manual"
    EVASION = "evasion"


class TrajectoryKind(enum.Enum):
    LANE_KEEP = "lane_keep"
    AVOIDANCE = "avoidance"


@dataclass(frozen=True)
class AgentCalibration:
    reaction_median: float = 0.35
    reaction_sigma_log: float = 0.2
    aggressiveness_range: tuple[float, float] = (1.5, 3.0)
    anticipation_range: tuple[float, float] = (0.9, 1.15)
    takeover_penalty: float = 0.3
    takeover_path_scale: float = 0.4
    trigger_latency: float = 0.10
    human_torque_limit: float = 15.0
    human_path_fraction: float = 0.6
    human_min_path: float = 8.0
    human_max_path: float = 25.0
    trial_reaction_sigma_log: float = 0.15


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: int
    reaction_time: float
    aggressiveness: float
    anticipation_crosswalk: float
    rng_seed: int

    def __post_init__(self):
        if not self.reaction_time > 0:
            raise ValueError("reaction_time must be > 0")
        if self.aggressiveness < 1:
            raise ValueError("aggressiveness must be >= 1")

    def to_dict(self):
        return asdict(self)


def make_profiles(master_seed: int, n: int = 12, calib: AgentCalibration | None = None) -> list[SubjectProfile]:
    """Draw ``n`` subjects from the calibration distributions, reproducibly."""
    calib = calib or AgentCalibration()
    rng = np.random.default_rng(master_seed)
    seeds = rng.integers(0, 2**63 - 1, size=n, dtype=np.int64)
    profiles = []
    for i in range(n):
        sub = np.random.default_rng(int(seeds[i]))
        rt = float(calib.reaction_median * math.exp(calib.reaction_sigma_log * sub.standard_normal()))
        agg = float(sub.uniform(*calib.aggressiveness_range))
        ant = float(sub.uniform(*calib.anticipation_range))
        profiles.append(SubjectProfile(i + 1, rt, agg, ant, int(seeds[i])))
    return profiles


def trial_reaction_time(profile: SubjectProfile, interface: "Interface", calib: AgentCalibration) -> float:
    """Reaction time for one interface: the subject's typical value with per-interface spread.

    Keyed by interface, not condition, so the crosswalk flag alone never changes it.
    """
    if calib.trial_reaction_sigma_log == 0:
        return profile.reaction_time
    key = list(Interface).index(interface)
    rng = np.random.default_rng([profile.rng_seed, key])
    return profile.reaction_time * math.exp(calib.trial_reaction_sigma_log * rng.standard_normal())


@dataclass(frozen=True)
class AgentOutput:
    driver_torque: float
    assist_enabled: bool
    active_trajectory: TrajectoryKind
    phase: Phase
    trajectory: TargetTrajectory


def _grid_step(t: float, dt: float) -> int:
    # first grid index at or after t
    return math.ceil(t / dt - 1e-9)


class _Agent:
    interface: Interface

    def __init__(self, profile: SubjectProfile, calib: AgentCalibration, reaction_time: float | None = None):
        self.profile = profile
        self.calib = calib
        self.reaction_time = profile.reaction_time if reaction_time is None else reaction_time
        self.lane_keep = StraightTrajectory(0.0)
        self.avoidance: TargetTrajectory | None = None

    def _visible_step(self, world: WorldState):
        if world.visible_since is None:
            return None
        return round(world.visible_since / world.config.dt)

    def _delay_elapsed(self, world: WorldState, delay: float) -> bool:
        vs = self._visible_step(world)
        if vs is None:
            return False
        return world.step_index >= vs + _grid_step(delay, world.config.dt)

    def step(self, world: WorldState) -> AgentOutput:
        raise NotImplementedError


class MyoAgent(_Agent):
    """Driver-initiated evasion: the trigger only chooses *when* automation evades."""

    interface = Interface.MYO_ARMBAND

    def __init__(self, profile, calib, reaction_time=None):
        super().__init__(profile, calib, reaction_time)
        self.trigger_time: float | None = None

    def trigger(self, world: WorldState):
        # latched: repeated triggers are ignored
        if self.avoidance is None:
            self.trigger_time = world.time
            self.avoidance = AvoidancePath(world.vehicle.x, world.config.avoidance_length, world.config.lane_width)

    def step(self, world: WorldState) -> AgentOutput:
        if self.avoidance is None and self._delay_elapsed(world, self.reaction_time + self.calib.trigger_latency):
            self.trigger(world)
        if self.avoidance is None:
            return AgentOutput(0.0, True, TrajectoryKind.LANE_KEEP, Phase.AUTOMATION, self.lane_keep)
        return AgentOutput(0.0, True, TrajectoryKind.AVOIDANCE, Phase.EVASION, self.avoidance)


class ManualDriverAgent(_Agent):
    interface = Interface.STEERING_WHEEL

    def __init__(self, profile, calib, reaction_time=None, gains=None, preview=None):
        super().__init__(profile, calib, reaction_time)
        self.base_gains = gains or ControllerGains()
        self.preview = preview or PreviewConfig()
        self._ctl: PreviewController | None = None

    def human_gains(self, crosswalk: bool) -> ControllerGains:
        factor = self.profile.aggressiveness
        if crosswalk:
            factor *= self.profile.anticipation_crosswalk
        return self.base_gains.scaled(factor, self.calib.human_torque_limit)

    def _controller(self, world: WorldState) -> PreviewController:
        if self._ctl is None:
            self._ctl = PreviewController(self.human_gains(world.config.crosswalk), self.preview, world.config.dt)
        return self._ctl

    path_scale = 1.0

    def plan_avoidance(self, world: WorldState) -> AvoidancePath:
        c = self.calib
        front = front_station(world.vehicle, world.vehicle_params)
        room = world.pedestrian_position[0] - front
        length = min(max(c.human_path_fraction * self.path_scale * room, c.human_min_path), c.human_max_path)
        return AvoidancePath(world.vehicle.x, length, world.config.lane_width)

    def _perceived(self, world: WorldState) -> bool:
        return self._delay_elapsed(world, self.reaction_time)

    def _manual_output(self, world: WorldState) -> AgentOutput:
        ctl = self._controller(world)
        if self.avoidance is None and self._perceived(world):
            self.avoidance = self.plan_avoidance(world)
            ctl.reset()
        traj = self.avoidance or self.lane_keep
        kind = TrajectoryKind.AVOIDANCE if self.avoidance is not None else TrajectoryKind.LANE_KEEP
        return AgentOutput(ctl(world.vehicle, traj), False, kind, Phase.MANUAL, traj)

    def step(self, world: WorldState) -> AgentOutput:
        return self._manual_output(world)


class TakeoverAgent(ManualDriverAgent):
    """Automation hands steering back the instant the pedestrian starts running."""

    interface = Interface.MANUAL_TAKEOVER

    def __init__(self, profile, calib, reaction_time=None, gains=None, preview=None):
        super().__init__(profile, calib, reaction_time, gains=gains, preview=preview)
        self.path_scale = calib.takeover_path_scale

    def _perceived(self, world):
        return self._delay_elapsed(world, self.reaction_time + self.calib.takeover_penalty)

    def step(self, world: WorldState) -> AgentOutput:
        if world.event_time is None or world.time < world.event_time - 1e-9:
            return AgentOutput(0.0, True, TrajectoryKind.LANE_KEEP, Phase.AUTOMATION, self.lane_keep)
        if not self._perceived(world):
            # hands not yet back on the wheel
            return AgentOutput(0.0, False, TrajectoryKind.LANE_KEEP, Phase.MANUAL, self.lane_keep)
        return self._manual_output(world)


AGENT_TYPES = {
    Interface.MYO_ARMBAND: MyoAgent,
    Interface.STEERING_WHEEL: ManualDriverAgent,
    Interface.MANUAL_TAKEOVER: TakeoverAgent,
}


def make_agent(interface: Interface, profile: SubjectProfile, calib: AgentCalibration, *, reaction_time=None,
               gains=None, preview=None) -> _Agent:
    cls = AGENT_TYPES[interface]
    if cls is MyoAgent:
        return cls(profile, calib, reaction_time)
    return cls(profile, calib, reaction_time, gains=gains, preview=preview)
