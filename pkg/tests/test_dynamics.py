import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evasim.dynamics import (
    DEFAULT_DT,
    NonFiniteStateError,
    SimClock,
    VehicleParams,
    VehicleState,
    lateral_acceleration,
    slip_angle,
    state_derivative,
    step_vehicle,
)


def steady_yaw_rate_oracle(vx, delta, m, lf, lr, cf, cr):
    # textbook linear bicycle: r = vx*delta / (L + Kus*vx^2)
    L = lf + lr
    kus = m / L * (lr / cf - lf / cr)
    return vx * delta / (L + kus * vx**2)


def hold_swa(state, params, n, dt=DEFAULT_DT):
    # column torque that balances the centering spring keeps swa fixed exactly
    torque = params.column_stiffness * state.swa
    for _ in range(n):
        state = step_vehicle(state, params, torque, 0.0, dt)
    return state


def column_step_oracle(J, b, k, T, t):
    """delta(t) for J d'' + b d' + k d = T from rest."""
    if k == 0:
        tau = J / b
        return T / b * (t - tau * (1 - math.exp(-t / tau)))
    disc = b * b - 4 * J * k
    if disc > 0:
        r1 = (-b + math.sqrt(disc)) / (2 * J)
        r2 = (-b - math.sqrt(disc)) / (2 * J)
        return T / k * (1 - (r2 * math.exp(r1 * t) - r1 * math.exp(r2 * t)) / (r2 - r1))
    wd = math.sqrt(-disc) / (2 * J)
    a = b / (2 * J)
    return T / k * (1 - math.exp(-a * t) * (math.cos(wd * t) + a / wd * math.sin(wd * t)))


class TestParams:
    def test_defaults(self):
        p = VehicleParams()
        assert p.mass == 1500 and p.yaw_inertia == 2500
        assert p.steering_ratio == 16
        assert p.wheelbase == pytest.approx(2.7)

    @pytest.mark.parametrize("field", ["mass", "yaw_inertia", "cornering_stiffness_front", "column_damping"])
    def test_rejects_nonpositive(self, field):
        with pytest.raises(ValueError):
            VehicleParams(**{field: 0.0})

    def test_ratio_at_least_one(self):
        with pytest.raises(ValueError):
            VehicleParams(steering_ratio=0.5)

    def test_zero_stiffness_allowed(self):
        assert VehicleParams(column_stiffness=0.0).column_stiffness == 0.0


class TestStateAndClock:
    def test_nonfinite_field_named(self):
        with pytest.raises(NonFiniteStateError, match="yaw_rate"):
            step_vehicle(VehicleState(yaw_rate=math.nan), VehicleParams(), 0, 0)

    def test_nonfinite_torque_named(self):
        with pytest.raises(NonFiniteStateError, match="driver_torque"):
            step_vehicle(VehicleState(), VehicleParams(), 0, math.inf)

    def test_nonpositive_vx(self):
        with pytest.raises(ValueError):
            step_vehicle(VehicleState(vx=0.0), VehicleParams(), 0, 0)

    def test_bad_dt(self):
        with pytest.raises(ValueError):
            step_vehicle(VehicleState(), VehicleParams(), 0, 0, dt=0.0)

    def test_clock(self):
        c = SimClock()
        assert c.dt == pytest.approx(1 / 120)
        c.tick()
        c.tick()
        assert c.step_index == 2 and c.time == pytest.approx(2 / 120)
        with pytest.raises(ValueError):
            SimClock(dt=0)


class TestStepVehicle:
    def test_straight_line_fixed_point(self):
        s = VehicleState()
        p = VehicleParams()
        for k in range(240):
            s = step_vehicle(s, p, 0.0, 0.0)
            assert s.vy == 0 and s.yaw_rate == 0 and s.swa == 0 and s.y == 0 and s.yaw == 0
        assert s.x == pytest.approx(240 * DEFAULT_DT * VehicleState().vx)

    def test_vx_unchanged(self):
        s = VehicleState(swa=0.3)
        s2 = step_vehicle(s, VehicleParams(), 2.0, 1.0)
        assert s2.vx == s.vx

    def test_deterministic(self):
        s = VehicleState(swa=0.1, vy=0.2, yaw_rate=0.05)
        a = step_vehicle(s, VehicleParams(), 1.5, -0.5)
        b = step_vehicle(s, VehicleParams(), 1.5, -0.5)
        assert a == b

    def test_torques_sum_on_column(self):
        s = VehicleState(swa=0.1)
        p = VehicleParams()
        assert step_vehicle(s, p, 1.0, 2.0) == step_vehicle(s, p, 3.0, 0.0)

    @pytest.mark.parametrize("k", [0.0, 1.0, 20.0])
    def test_column_step_response(self, k):
        # column dynamics do not depend on the bicycle states, so the closed form applies directly
        p = VehicleParams(column_stiffness=k)
        T = 0.8
        s = VehicleState()
        n = 120
        for _ in range(n):
            s = step_vehicle(s, p, T, 0.0)
        expect = column_step_oracle(p.column_inertia, p.column_damping, k, T, n * DEFAULT_DT)
        assert s.swa == pytest.approx(expect, rel=1e-6)

    def test_steady_state_yaw_rate(self):
        p = VehicleParams()
        s = hold_swa(VehicleState(swa=math.radians(30)), p, 1200)
        delta = math.radians(30) / p.steering_ratio
        r = steady_yaw_rate_oracle(s.vx, delta, p.mass, p.dist_cg_front_axle, p.dist_cg_rear_axle,
                                   p.cornering_stiffness_front, p.cornering_stiffness_rear)
        assert s.yaw_rate == pytest.approx(r, rel=1e-6)
        assert s.swa == math.radians(30)

    def test_steady_state_lateral_accel(self):
        p = VehicleParams()
        s = hold_swa(VehicleState(swa=0.4), p, 1200)
        d = state_derivative(s, p, p.column_stiffness * s.swa)
        ay = lateral_acceleration(s, d.vy, s.yaw_rate)
        assert ay == pytest.approx(s.vx * s.yaw_rate, rel=1e-6)

    def test_linearity_of_steady_state(self):
        p = VehicleParams()
        r1 = hold_swa(VehicleState(swa=0.01), p, 1200).yaw_rate
        r2 = hold_swa(VehicleState(swa=0.02), p, 1200).yaw_rate
        assert r2 == pytest.approx(2 * r1, rel=1e-9)

    def test_rk4_fourth_order(self):
        # error after 1 s shrinks ~16x per halving of dt
        p = VehicleParams()
        s0 = VehicleState(swa=0.2, vy=0.1, yaw_rate=0.05)

        def run(dt):
            s = s0
            for _ in range(round(1.0 / dt)):
                s = step_vehicle(s, p, 0.7, 0.0, dt)
            return np.array([s.y, s.yaw, s.vy, s.yaw_rate, s.swa])

        a, b, c = run(1 / 30), run(1 / 60), run(1 / 120)
        ratio = np.abs(a - b) / np.abs(b - c)
        assert np.all((ratio > 12) & (ratio < 20)), ratio

    def test_rightward_steer_gives_negative_response(self):
        p = VehicleParams()
        s = hold_swa(VehicleState(swa=-0.3), p, 240)
        d = state_derivative(s, p, p.column_stiffness * s.swa)
        assert s.yaw_rate < 0 and lateral_acceleration(s, d.vy, s.yaw_rate) < 0 and s.y < 0


class TestSlipAndAccel:
    def test_examples(self):
        assert slip_angle(VehicleState(vy=0.0, vx=8.33)) == 0.0
        assert slip_angle(VehicleState(vy=3.0, vx=3.0)) == pytest.approx(45.0)
        oracle = float(mpmath.degrees(mpmath.atan(mpmath.mpf("0.5") / mpmath.mpf("8.33"))))
        assert slip_angle(VehicleState(vy=0.5, vx=8.33)) == pytest.approx(oracle, abs=1e-12)

    def test_undefined_when_stopped(self):
        with pytest.raises(ValueError):
            slip_angle(VehicleState(vx=0.0))
        with pytest.raises(ValueError):
            slip_angle(VehicleState(vx=-1.0))

    @given(st.floats(-20, 20), st.floats(0.1, 50))
    def test_odd_in_vy(self, vy, vx):
        assert slip_angle(VehicleState(vy=-vy, vx=vx)) == -slip_angle(VehicleState(vy=vy, vx=vx))

    def test_lateral_accel_examples(self):
        assert lateral_acceleration(VehicleState(), 0.0, 0.0) == 0.0
        assert lateral_acceleration(VehicleState(vx=8.33), 0.0, 0.1) == pytest.approx(0.833)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-0.5, 0.5), st.floats(-5, 5))
    def test_step_deterministic_property(self, vy, r, swa, torque):
        s = VehicleState(vy=vy, yaw_rate=r, swa=swa)
        assert step_vehicle(s, VehicleParams(), torque, 0) == step_vehicle(s, VehicleParams(), torque, 0)
