import pytest
from hypothesis import given, strategies as st

from persimon.model import (AgentSpec, InfoMode, Numerics, Scenario, ScenarioError,
                            Target, joint_detection, sensing_grad, sensing_prob,
                            uncertainty_rate)


class TestSensingProb:
    def test_on_target(self):
        assert sensing_prob(10.0, 10.0, 3.0) == 1.0

    def test_at_range_boundary(self):
        assert sensing_prob(10.0, 13.0, 3.0) == 0.0

    def test_midpoint(self):
        assert sensing_prob(10.0, 11.5, 3.0) == 0.5

    @given(st.floats(0, 40), st.floats(0, 40), st.floats(0.1, 10))
    def test_range_and_symmetry(self, x, s, r):
        p = sensing_prob(x, s, r)
        assert 0.0 <= p <= 1.0
        assert p == sensing_prob(s, x, r)

    @given(st.floats(0, 40), st.floats(0, 40), st.floats(0.1, 10),
           st.floats(-1e-3, 1e-3))
    def test_lipschitz_in_position(self, x, s, r, ds):
        assert abs(sensing_prob(x, s + ds, r) - sensing_prob(x, s, r)) <= abs(ds) / r + 1e-12


class TestSensingGrad:
    def test_left_of_target(self):
        assert sensing_grad(10.0, 8.0, 3.0) == pytest.approx(1.0 / 3.0)

    def test_right_of_target(self):
        assert sensing_grad(10.0, 11.0, 3.0) == pytest.approx(-1.0 / 3.0)

    def test_out_of_range(self):
        assert sensing_grad(10.0, 14.0, 3.0) == 0.0

    def test_boundary_is_zero(self):
        assert sensing_grad(10.0, 13.0, 3.0) == 0.0
        assert sensing_grad(10.0, 7.0, 3.0) == 0.0

    def test_on_target_uses_motion_direction(self):
        assert sensing_grad(10.0, 10.0, 3.0, direction=1) == pytest.approx(-1.0 / 3.0)
        assert sensing_grad(10.0, 10.0, 3.0, direction=-1) == pytest.approx(1.0 / 3.0)
        assert sensing_grad(10.0, 10.0, 3.0) == 0.0

    @given(st.floats(0, 40), st.floats(0, 40), st.floats(0.5, 5))
    def test_matches_finite_difference_away_from_kinks(self, x, s, r):
        d = abs(x - s)
        eps = 1e-6
        if d < eps or abs(d - r) < eps or d > r + 1.0:
            return
        fd = (sensing_prob(x, s + eps, r) - sensing_prob(x, s - eps, r)) / (2 * eps)
        assert sensing_grad(x, s, r) == pytest.approx(fd, abs=1e-6)


class TestJointDetection:
    def test_single_agent(self):
        # one agent with p = 0.6
        assert joint_detection(10.0, [11.2], [3.0]) == pytest.approx(0.6)

    def test_two_agents_half_each(self):
        assert joint_detection(10.0, [8.5, 11.5], [3.0, 3.0]) == pytest.approx(0.75)

    def test_empty(self):
        assert joint_detection(10.0, [], []) == 0.0
        assert joint_detection(10.0, [20.0], [3.0]) == 0.0

    @given(st.lists(st.floats(0, 40), min_size=1, max_size=5), st.floats(0, 40))
    def test_monotone_and_invariant_to_blind_agents(self, positions, x):
        r = [3.0] * len(positions)
        base = joint_detection(x, positions, r)
        assert 0.0 <= base <= 1.0
        # adding an out-of-range agent changes nothing
        assert joint_detection(x, positions + [x + 10.0], r + [3.0]) == pytest.approx(base)
        # moving any agent onto the target can only increase detection
        assert joint_detection(x, [x] + positions[1:], r) >= base - 1e-12


class TestUncertaintyRate:
    def test_floor_holds(self):
        assert uncertainty_rate(0.0, 0.4, 1.0, 5.0) == 0.0

    def test_unobserved_growth(self):
        assert uncertainty_rate(2.0, 0.0, 1.0, 5.0) == 1.0

    def test_floor_released_when_pressure_too_low(self):
        assert uncertainty_rate(0.0, 0.1, 1.0, 5.0) == pytest.approx(0.5)

    def test_negative_uncertainty_rejected(self):
        with pytest.raises(ValueError):
            uncertainty_rate(-1e-3, 0.5, 1.0, 5.0)

    @given(st.floats(0, 1), st.floats(0.1, 2), st.floats(0.2, 8))
    def test_never_pushes_below_floor(self, P, A, Bex):
        B = A + Bex
        assert uncertainty_rate(0.0, P, A, B) >= 0.0


class TestValidation:
    def test_decay_must_exceed_growth(self):
        t = Target(2, 10.0, 1.0, 0.5, 1.0)
        with pytest.raises(ScenarioError, match="targets\\[2\\]"):
            t.validate(40.0)

    def test_comm_range_rule(self):
        a = AgentSpec(1, 5.0, 1, 3.0, 5.0)
        with pytest.raises(ScenarioError, match="agents\\[1\\]"):
            a.validate(40.0)

    def test_position_bounds(self):
        with pytest.raises(ScenarioError):
            Target(0, 45.0, 1.0, 5.0, 1.0).validate(40.0)

    def test_numerics(self):
        with pytest.raises(ScenarioError):
            Numerics(h=1e-3, eps_event=1e-2).validate()

    def test_valid_scenario_passes(self):
        sc = Scenario(L=40.0, T=10.0,
                      targets=(Target(0, 10.0, 1.0, 5.0, 1.0),),
                      agents=(AgentSpec(0, 5.0, 1, 3.0, 6.0),),
                      mode=InfoMode.ALMOST)
        sc.validate()
