"""
Tests for the chain: transitions, trajectories and passage times.

Run with: pytest tests/test_chain.py -v
"""

import logging
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.chain import (
    Drift, HitVariant, ModelSpec, PassageBatch, accessibility_bound, deterministic_hitting_time,
    min_steps_to_target, passage_time, passage_times_batch, simulate, step, write_trajectory_csv,
)
from src.dist import InnovationSpec, PointMass
from src.errors import DomainError

RECURRENT = (ModelSpec(Drift.DOWN, 0.5, target_a=2.0), InnovationSpec(theta_right=0.7))
TRANSIENT = (ModelSpec(Drift.DOWN, 0.5, target_a=2.0), InnovationSpec(theta_right=0.3, c_right=0.1))


class TestModelSpec:
    """Model validation."""

    @pytest.mark.parametrize("gamma", [0.0, 1.0, -0.2])
    def test_gamma_range(self, gamma):
        with pytest.raises(DomainError):
            ModelSpec(gamma=gamma)

    def test_negative_target(self):
        with pytest.raises(DomainError):
            ModelSpec(target_a=-1.0)

    def test_small_target_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            ModelSpec(target_a=1.0)
        assert "target_a" in caplog.text

    def test_sign(self):
        assert ModelSpec(Drift.DOWN).sign == -1.0
        assert ModelSpec("up").sign == 1.0


class TestStep:
    """One transition."""

    def test_down_step(self):
        assert step(ModelSpec(Drift.DOWN, 0.5), 4.0, 1.0) == pytest.approx(3.0)

    def test_up_step(self):
        assert step(ModelSpec(Drift.UP, 0.5), 4.0, -1.0) == pytest.approx(5.0)

    def test_reflection(self):
        assert step(ModelSpec(Drift.UP, 0.5), 4.0, -100.0) == 0.0

    def test_vectorised(self):
        out = step(ModelSpec(Drift.DOWN, 0.5), np.array([4.0, 9.0]), np.array([0.0, 0.0]))
        assert np.allclose(out, [2.0, 6.0])

    @settings(max_examples=50, deadline=None)
    @given(
        gamma=st.floats(0.05, 0.95),
        x=st.floats(1.0, 1e8),
        gap=st.floats(0.0, 1e6),
        alpha=st.floats(-1e9, 1e9),
    )
    def test_monotone_coupling(self, gamma, x, gap, alpha):
        # x - x^gamma is increasing on [1, inf), so shared innovations keep order
        model = ModelSpec(Drift.DOWN, gamma)
        slack = 1e-12 * (x + gap + abs(alpha))
        assert step(model, x, alpha) <= step(model, x + gap, alpha) + slack


class TestSimulate:
    """Trajectory materialisation."""

    def test_shape_and_start(self):
        model, dist = RECURRENT
        traj = simulate(model, dist, 100.0, 50, seed=1)
        assert traj.shape == (51,)
        assert traj[0] == 100.0
        assert np.all(traj >= 0)

    def test_reproducible(self):
        model, dist = RECURRENT
        assert np.array_equal(simulate(model, dist, 100.0, 200, 5, 3), simulate(model, dist, 100.0, 200, 5, 3))

    def test_indices_independent(self):
        model, dist = RECURRENT
        assert not np.array_equal(simulate(model, dist, 100.0, 50, 5, 0), simulate(model, dist, 100.0, 50, 5, 1))

    def test_bad_horizon(self):
        model, dist = RECURRENT
        with pytest.raises(DomainError):
            simulate(model, dist, 100.0, 0, 1)

    def test_csv(self, tmp_path):
        model, dist = RECURRENT
        path = write_trajectory_csv(tmp_path / "t.csv", simulate(model, dist, 10.0, 5, 2))
        lines = path.read_text().splitlines()
        assert lines[0] == "# heavytail trajectory v1"
        assert lines[1] == "n,state"
        assert len(lines) == 8


class TestPassageTime:
    """First passage into A."""

    def test_zero_innovation_stub(self):
        model = ModelSpec(Drift.DOWN, 0.5, target_a=1.0)
        result = passage_time(model, PointMass(0.0), 4.0, 100, seed=0)
        assert result.tau == 2
        assert result.hit_value == pytest.approx(2.0 - 2.0 ** 0.5)
        assert not result.censored

    def test_matches_trajectory(self):
        model, dist = RECURRENT
        for index in range(20):
            traj = simulate(model, dist, 30.0, 500, 9, index)
            hits = np.nonzero(traj[1:] <= model.target_a)[0]
            result = passage_time(model, dist, 30.0, 500, 9, index)
            if hits.size:
                assert result.tau == hits[0] + 1
                assert result.hit_value == traj[hits[0] + 1]
            else:
                assert result.censored

    def test_batch_equals_single_calls(self):
        model, dist = RECURRENT
        batch = passage_times_batch(model, dist, 50.0, 2000, 4, np.arange(30))
        for i in range(30):
            single = passage_time(model, dist, 50.0, 2000, 4, i)
            assert batch.result(i).tau == single.tau
            assert batch.result(i).censored == single.censored

    def test_pruning_is_exact(self):
        model, dist = TRANSIENT
        pruned = passage_times_batch(model, dist, 100.0, 3000, 8, np.arange(300), prune=True)
        full = passage_times_batch(model, dist, 100.0, 3000, 8, np.arange(300), prune=False)
        assert np.array_equal(pruned.tau, full.tau)

    def test_censoring_report(self):
        model, dist = TRANSIENT
        result = passage_time(model, dist, 1e6, 5, 0)
        assert result.censored
        assert result.to_dict()["tau"] == "CENSORED"

    def test_start_inside_target(self):
        model, dist = RECURRENT
        with pytest.raises(DomainError):
            passage_time(model, dist, 1.5, 100, 0)

    def test_concat_sorts_by_index(self):
        model, dist = RECURRENT
        a = passage_times_batch(model, dist, 50.0, 100, 1, [3, 4])
        b = passage_times_batch(model, dist, 50.0, 100, 1, [0, 1, 2])
        merged = PassageBatch.concat([a, b], 100)
        assert list(merged.indices) == [0, 1, 2, 3, 4]

    def test_escape_bound_is_lower_bound(self):
        model = ModelSpec(Drift.DOWN, 0.5, target_a=2.0)
        x = np.array([10.0, 100.0, 1e4])
        bound = min_steps_to_target(model, x)
        for xi, b in zip(x, bound):
            assert deterministic_hitting_time(0.5, xi, 2.0).exact_steps >= b


class TestDeterministicHitting:
    """Deterministic skeleton against the continuum time."""

    @pytest.mark.parametrize("gamma,lo", [(0.3, 0.98), (0.5, 0.98), (0.7, 0.95)])
    def test_plain_ratio(self, gamma, lo):
        hit = deterministic_hitting_time(gamma, 1e6, 1.0, HitVariant.PLAIN)
        assert lo <= hit.ratio <= 1.02

    @pytest.mark.parametrize("gamma", [0.3, 0.5, 0.7])
    def test_plain_refined(self, gamma):
        hit = deterministic_hitting_time(gamma, 1e6, 1.0)
        assert abs(hit.exact_steps / hit.refined - 1.0) <= 0.02

    @pytest.mark.parametrize("gamma", [0.3, 0.5, 0.7])
    def test_shifted_ratio(self, gamma):
        hit = deterministic_hitting_time(gamma, 1e6, 2.0, HitVariant.SHIFTED)
        assert 0.95 <= hit.ratio <= 1.05
        assert hit.refined is None

    @pytest.mark.parametrize("gamma", [0.3, 0.5, 0.7])
    def test_ratio_improves_with_x0(self, gamma):
        gaps = [abs(deterministic_hitting_time(gamma, x0, 1.0).ratio - 1) for x0 in (1e3, 1e4, 1e5, 1e6)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_shifted_needs_target_above_one(self):
        with pytest.raises(DomainError):
            deterministic_hitting_time(0.5, 100.0, 1.0, HitVariant.SHIFTED)

    def test_start_below_target(self):
        with pytest.raises(DomainError):
            deterministic_hitting_time(0.5, 1.0, 2.0)

    def test_zero_innovation_campaign_matches(self):
        model = ModelSpec(Drift.DOWN, 0.5, target_a=2.0)
        expected = deterministic_hitting_time(0.5, 100.0, 2.0).exact_steps
        batch = passage_times_batch(model, PointMass(0.0), 100.0, 10_000, 0, np.arange(10))
        assert np.all(batch.tau == expected)


class TestAccessibility:
    """Lower bound on reaching A along the shifted skeleton."""

    def test_bound_value(self):
        model, dist = RECURRENT
        steps = deterministic_hitting_time(0.5, 10.0, 2.0, HitVariant.SHIFTED).exact_steps
        assert accessibility_bound(model, dist, 10.0) == pytest.approx(0.5 ** steps)

    def test_bound_holds_empirically(self):
        model, dist = RECURRENT
        steps = deterministic_hitting_time(0.5, 10.0, 2.0, HitVariant.SHIFTED).exact_steps
        batch = passage_times_batch(model, dist, 10.0, steps, 12, np.arange(4000))
        assert np.mean(~batch.censored) >= accessibility_bound(model, dist, 10.0)

    def test_up_drift_rejected(self):
        with pytest.raises(DomainError):
            accessibility_bound(ModelSpec(Drift.UP, 0.5), InnovationSpec(side="negative", theta_left=0.3), 10.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
