import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evasim.agents import (
    AgentCalibration,
    Interface,
    ManualDriverAgent,
    MyoAgent,
    Phase,
    SubjectProfile,
    TakeoverAgent,
    TrajectoryKind,
    make_agent,
    make_profiles,
    trial_reaction_time,
)
from evasim.config import SimConfig
from evasim.dynamics import VehicleParams, VehicleState
from evasim.harness.design import CONDITIONS, ConditionSpec
from evasim.harness.trial import run_trial
from evasim.scenario import ScenarioConfig, WorldState

CAL = AgentCalibration()
SC = ScenarioConfig()
DT = SC.dt
PROFILE = SubjectProfile(1, reaction_time=0.35, aggressiveness=2.0, anticipation_crosswalk=1.1, rng_seed=5)


def world(k, visible_since_step=None, crosswalk=False, vehicle=None, present=True):
    cfg = replace(SC, crosswalk=crosswalk, pedestrian_present=present)
    vs = None if visible_since_step is None else visible_since_step * DT
    return WorldState(
        config=cfg,
        vehicle_params=VehicleParams(),
        time=k * DT,
        vehicle=vehicle or VehicleState(x=SC.vehicle_speed * k * DT),
        pedestrian_position=(cfg.crossing_x(), 0.0) if vs is not None else None,
        pedestrian_visible=vs is not None and k >= visible_since_step,
        event_time=cfg.event_time() if present else None,
        visible_since=vs,
    )


class TestProfiles:
    def test_reproducible(self):
        assert make_profiles(11) == make_profiles(11)
        assert make_profiles(11) != make_profiles(12)

    def test_prefix_stable(self):
        assert make_profiles(3, 12)[:4] == make_profiles(3, 4)

    @given(st.integers(0, 2**32))
    @settings(max_examples=30)
    def test_invariants(self, seed):
        for p in make_profiles(seed, 12):
            assert p.aggressiveness >= 1 and p.reaction_time > 0
            assert CAL.anticipation_range[0] <= p.anticipation_crosswalk <= CAL.anticipation_range[1]

    def test_validation(self):
        with pytest.raises(ValueError):
            replace(PROFILE, aggressiveness=0.9)
        with pytest.raises(ValueError):
            replace(PROFILE, reaction_time=0.0)

    def test_reaction_keyed_by_interface(self):
        rts = {i: trial_reaction_time(PROFILE, i, CAL) for i in Interface}
        assert len(set(rts.values())) == 3
        assert trial_reaction_time(PROFILE, Interface.MYO_ARMBAND, CAL) == rts[Interface.MYO_ARMBAND]
        assert trial_reaction_time(PROFILE, Interface.MYO_ARMBAND, replace(CAL, trial_reaction_sigma_log=0)) == 0.35


class TestMyo:
    def test_switch_exactly_after_delay(self):
        agent = MyoAgent(PROFILE, CAL)
        tv = 640
        delay = round((0.35 + 0.10) / DT)
        assert delay == 54
        for k in range(tv, tv + delay):
            out = agent.step(world(k, tv))
            assert out.active_trajectory is TrajectoryKind.LANE_KEEP and out.phase is Phase.AUTOMATION
        out = agent.step(world(tv + delay, tv))
        assert out.active_trajectory is TrajectoryKind.AVOIDANCE
        assert agent.trigger_time == pytest.approx((tv + delay) * DT)
        assert out.assist_enabled and out.driver_torque == 0.0

    def test_latched(self):
        agent = MyoAgent(PROFILE, CAL)
        agent.trigger(world(700, 600))
        path = agent.avoidance
        for k in range(701, 760):
            agent.trigger(world(k, 600))
            assert agent.step(world(k, 600)).trajectory is path
        assert agent.trigger_time == pytest.approx(700 * DT)

    def test_no_pedestrian_keeps_lane(self):
        agent = MyoAgent(PROFILE, CAL)
        for k in range(0, 1500, 7):
            out = agent.step(world(k, present=False))
            assert out.active_trajectory is TrajectoryKind.LANE_KEEP and out.assist_enabled


class TestManual:
    def test_centre_lane_zero_torque(self):
        agent = ManualDriverAgent(PROFILE, CAL)
        for k in range(100):
            out = agent.step(world(k))
            assert out.driver_torque == 0.0 and not out.assist_enabled and out.phase is Phase.MANUAL

    def test_crosswalk_multiplier(self):
        agent = ManualDriverAgent(PROFILE, CAL)
        a, b = agent.human_gains(False), agent.human_gains(True)
        assert a.a1 == pytest.approx(0.19 * 2.0) and b.a1 == pytest.approx(0.19 * 2.0 * 1.1)
        assert a.torque_limit == CAL.human_torque_limit

    def test_aggressiveness_doubles_torque(self):
        def first_torque(aggr):
            agent = ManualDriverAgent(replace(PROFILE, aggressiveness=aggr), CAL)
            return agent.step(world(0, vehicle=VehicleState(y=0.1))).driver_torque

        assert first_torque(2.0) == pytest.approx(2 * first_torque(1.0), rel=1e-12)

    def test_plans_after_reaction(self):
        agent = ManualDriverAgent(PROFILE, CAL)
        tv = 640
        n = math.ceil(0.35 / DT - 1e-9)
        for k in range(tv, tv + n):
            assert agent.step(world(k, tv)).active_trajectory is TrajectoryKind.LANE_KEEP
        out = agent.step(world(tv + n, tv))
        assert out.active_trajectory is TrajectoryKind.AVOIDANCE
        assert out.driver_torque < 0  # rightward

    def test_path_length_bounded(self):
        agent = ManualDriverAgent(PROFILE, CAL)
        w = world(640, 600)
        for x in (0.0, 20.0, 40.0, 46.0):
            p = agent.plan_avoidance(replace(w, vehicle=VehicleState(x=x)))
            assert CAL.human_min_path <= p.length <= CAL.human_max_path


class TestTakeover:
    def test_automation_then_cut(self):
        agent = TakeoverAgent(PROFILE, CAL)
        ev = SC.event_step()
        out = agent.step(world(ev - 1, ev + 10))
        assert out.assist_enabled and out.phase is Phase.AUTOMATION
        out = agent.step(world(ev, ev + 10))
        assert not out.assist_enabled and out.driver_torque == 0.0

    def test_penalty_delay(self):
        agent = TakeoverAgent(PROFILE, CAL)
        tv = SC.event_step() + 10
        n = math.ceil((0.35 + 0.3) / DT - 1e-9)
        for k in range(SC.event_step(), tv + n):
            assert agent.step(world(k, tv)).driver_torque == 0.0
        assert agent.step(world(tv + n, tv)).driver_torque != 0.0

    def test_shorter_plan(self):
        w = world(640, 600)
        assert TakeoverAgent(PROFILE, CAL).plan_avoidance(w).length <= ManualDriverAgent(PROFILE, CAL).plan_avoidance(
            w
        ).length


@pytest.fixture(scope="module")
def traces():
    prof = make_profiles(2021, 1)[0]
    return prof, {cid: run_trial(CONDITIONS[cid], prof) for cid in (1, 2, 3, 6)}


class TestInTrial:
    def test_exclusive_authority(self, traces):
        _, tr = traces
        for t in tr.values():
            both = (np.asarray(t["assist_torque"]) != 0) & (np.asarray(t["driver_torque"]) != 0)
            assert not both.any()

    def test_takeover_reaction_floor(self, traces):
        prof, tr = traces
        t = tr[6]
        vis = np.asarray(t["ped_visible"]) > 0
        tvis = np.asarray(t["t"])[vis.argmax()]
        drv = np.asarray(t["driver_torque"]) != 0
        tfirst = np.asarray(t["t"])[drv.argmax()]
        assert tfirst >= tvis + 0.65 - 1e-9
        assert tfirst >= tvis + trial_reaction_time(prof, Interface.MANUAL_TAKEOVER, CAL) + CAL.takeover_penalty - 1e-9

    def test_takeover_assist_zero_after_event(self, traces):
        _, tr = traces
        t = tr[6]
        after = np.asarray(t["t"]) >= 0
        assert np.all(np.asarray(t["assist_torque"])[after] == 0.0)

    def test_myo_conditions_identical(self, traces):
        _, tr = traces
        for c in ("x", "y", "swa_deg", "assist_torque"):
            assert np.array_equal(tr[1][c], tr[2][c])

    def test_no_pedestrian_same_across_interfaces(self):
        prof = make_profiles(2021, 1)[0]
        a = run_trial(ConditionSpec(0, Interface.MYO_ARMBAND, False, False), prof)
        b = run_trial(ConditionSpec(0, Interface.MANUAL_TAKEOVER, False, False), prof)
        assert np.array_equal(a["y"], b["y"]) and np.array_equal(a["assist_torque"], b["assist_torque"])

    def test_deterministic(self):
        prof = make_profiles(2021, 2)[1]
        a = run_trial(CONDITIONS[5], prof)
        b = run_trial(CONDITIONS[5], prof)
        for c in ("x", "y", "swa_deg", "driver_torque"):
            assert np.array_equal(a[c], b[c])

    def test_make_agent_types(self):
        assert isinstance(make_agent(Interface.MYO_ARMBAND, PROFILE, CAL), MyoAgent)
        assert type(make_agent(Interface.STEERING_WHEEL, PROFILE, CAL)) is ManualDriverAgent
        assert isinstance(make_agent(Interface.MANUAL_TAKEOVER, PROFILE, CAL), TakeoverAgent)
