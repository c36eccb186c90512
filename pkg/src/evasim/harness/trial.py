"""Closed-loop simulation of one subject driving one condition."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..agents import AgentCalibration, SubjectProfile, make_agent, trial_reaction_time
from ..config import SimConfig
from ..control import PreviewController
from ..dynamics import NonFiniteStateError, slip_angle, state_derivative, step_vehicle
from ..metrics import TRACE_COLUMNS, TrialTrace
from ..scenario import build_world, front_station, step_pedestrian
from .design import ConditionSpec


class TrialDivergence(RuntimeError):
    def __init__(self, message: str, trace: TrialTrace):
        super().__init__(message)
        self.trace = trace


def trial_id(subject_id: int, condition_id: int) -> str:
    return f"s{subject_id:02d}_c{condition_id}"


def run_trial(condition: ConditionSpec, profile: SubjectProfile, config: SimConfig | None = None) -> TrialTrace:
    """Simulate until just before the car's front reaches the pedestrian's station.

    Without a pedestrian the drive ends once the far preview point would leave
    the road. Loop order per 1/120 s tick: agent decision, assist torque (if
    enabled), record, dynamics step, pedestrian step.
    """
    config = config or SimConfig()
    vp = config.vehicle
    scen = replace(config.scenario, crosswalk=condition.crosswalk, pedestrian_present=condition.pedestrian_present)
    dt = scen.dt
    calib: AgentCalibration = config.agents
    rt = trial_reaction_time(profile, condition.interface, calib)
    agent = make_agent(
        condition.interface, profile, calib, reaction_time=rt, gains=config.controller, preview=config.preview
    )
    assist = PreviewController(config.controller, config.preview, dt)
    world = build_world(scen, vp)
    crossing = scen.crossing_x(vp)
    road_end = scen.road_length - config.preview.far_distance
    event_step = scen.event_step()

    rows = {c: [] for c in TRACE_COLUMNS}
    last_traj = None
    k = 0
    max_steps = int(math.ceil(scen.road_length / scen.vehicle_speed / dt)) + 1
    try:
        while k <= max_steps:
            v = world.vehicle
            if condition.pedestrian_present:
                if front_station(v, vp) >= crossing:
                    break
            elif v.x >= road_end:
                break
            out = agent.step(world)
            if out.assist_enabled:
                if out.trajectory is not last_traj:
                    assist.reset()
                    last_traj = out.trajectory
                t_assist = assist(v, out.trajectory)
            else:
                if last_traj is not None:
                    assist.reset()
                last_traj = None
                t_assist = 0.0
            torque = t_assist + out.driver_torque
            deriv = state_derivative(v, vp, torque)
            ped = world.pedestrian_position
            rows["t"].append((k - event_step) * dt)
            rows["x"].append(v.x)
            rows["y"].append(v.y)
            rows["yaw_deg"].append(math.degrees(v.yaw))
            rows["vx"].append(v.vx)
            rows["vy"].append(v.vy)
            rows["yaw_rate"].append(v.yaw_rate)
            rows["beta_deg"].append(slip_angle(v))
            rows["ay"].append(deriv.vy + v.vx * v.yaw_rate)
            rows["swa_deg"].append(math.degrees(v.swa))
            rows["assist_torque"].append(t_assist)
            rows["driver_torque"].append(out.driver_torque)
            rows["ped_x"].append(ped[0] if ped else math.nan)
            rows["ped_y"].append(ped[1] if ped else math.nan)
            rows["ped_visible"].append(1.0 if world.pedestrian_visible else 0.0)
            rows["phase"].append(out.phase.value)
            rows["trajectory"].append(out.active_trajectory.value)
            nxt = step_vehicle(v, vp, t_assist, out.driver_torque, dt)
            nxt.check()
            world = step_pedestrian(replace(world, vehicle=nxt), dt)
            k += 1
    except (NonFiniteStateError, ValueError) as exc:
        raise TrialDivergence(
            f"trial {trial_id(profile.subject_id, condition.condition_id)} diverged at step {k}: {exc}",
            _make_trace(rows, condition, profile, scen, rt),
        ) from exc
    return _make_trace(rows, condition, profile, scen, rt)


def _make_trace(rows, condition, profile, scen, rt) -> TrialTrace:
    cols = {}
    for name, vals in rows.items():
        cols[name] = np.array(vals, dtype=object if name in ("phase", "trajectory") else float)
    meta = {
        "trial_id": trial_id(profile.subject_id, condition.condition_id),
        "subject_id": profile.subject_id,
        "condition_id": condition.condition_id,
        "interface": condition.interface.value,
        "crosswalk": condition.crosswalk,
        "pedestrian_present": condition.pedestrian_present,
        "event_time": scen.event_time() if condition.pedestrian_present else None,
        "reaction_time": rt,
    }
    return TrialTrace(cols, meta)
