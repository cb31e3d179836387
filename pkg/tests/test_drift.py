"""
Tests for drift quadrature, asymptotics and grid certificates.

Run with: pytest tests/test_drift.py -v
"""

import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.chain import Drift, ModelSpec
from src.dist import InnovationSpec, PointMass
from src.drift import (
    GRID_NOTE, REPORT_SCHEMA, Condition, ConditionKind, LyapunovSpec, check_condition, drift_asymptotic,
    drift_estimate, drift_quadrature, geometric_grid, partition_breakpoints, partition_decomposition,
)
from src.errors import DivergenceError, DomainError

DOWN = ModelSpec(Drift.DOWN, 0.5, target_a=2.0)
UP = ModelSpec(Drift.UP, 0.5, target_a=2.0)
RECURRENT_LAW = InnovationSpec(theta_right=0.7, c_right=0.2)
TRANSIENT_LAW = InnovationSpec(theta_right=0.3)
OPPOSING_LAW = InnovationSpec(side="negative", theta_left=0.3)

GRID = geometric_grid(1e2, 1e6, 16)


class TestLyapunovSpec:
    """Test-function validation."""

    def test_zero_delta(self):
        with pytest.raises(DomainError):
            LyapunovSpec(0.0)

    def test_negative_needs_clip(self):
        with pytest.raises(DomainError):
            LyapunovSpec(-0.2)

    def test_clipped_values(self):
        g = LyapunovSpec(-0.5, clipped=True)
        assert g.value(0.0) == 1.0
        assert g.value(0.5) == 1.0
        assert g.value(4.0) == pytest.approx(0.5)

    def test_condition_validation(self):
        with pytest.raises(DomainError):
            Condition(ConditionKind.T2_2_MOMENT_LOWER, p=2.0)
        with pytest.raises(DomainError):
            Condition("T2_2_MOMENT_UPPER", p=0.0)


class TestDriftQuadrature:
    """Dg^p by quadrature."""

    def test_point_mass_exact(self):
        value = drift_quadrature(DOWN, PointMass(0.0), LyapunovSpec(1.0), 1.0, 100.0)
        assert value == pytest.approx(-10.0, rel=1e-14)

    def test_point_mass_reflection(self):
        est = drift_estimate(UP, PointMass(-1000.0), LyapunovSpec(0.5), 1.0, 100.0)
        assert est.value == pytest.approx(-10.0)
        assert est.atom == pytest.approx(-10.0)

    def test_error_is_small(self):
        est = drift_estimate(DOWN, RECURRENT_LAW, LyapunovSpec(0.2), 1.0, 1e4)
        scale = sum(abs(v) for _, _, v in est.segments) + abs(est.atom)
        assert est.error <= 1e-7 * scale

    def test_refinement_stable(self):
        coarse = drift_estimate(DOWN, RECURRENT_LAW, LyapunovSpec(0.2), 1.0, 1e4, rel_tol=1e-7).value
        fine = drift_estimate(DOWN, RECURRENT_LAW, LyapunovSpec(0.2), 1.0, 1e4, rel_tol=1e-11).value
        assert fine == pytest.approx(coarse, rel=1e-6)

    def test_extra_breakpoints_do_not_change_value(self):
        lyap = LyapunovSpec(0.2)
        plain = drift_quadrature(DOWN, RECURRENT_LAW, lyap, 1.0, 500.0)
        split = drift_quadrature(DOWN, RECURRENT_LAW, lyap, 1.0, 500.0, extra_breakpoints=(3.0, 77.0, 4000.0))
        assert split == pytest.approx(plain, rel=1e-8)

    def test_divergence(self):
        with pytest.raises(DivergenceError):
            drift_quadrature(DOWN, RECURRENT_LAW, LyapunovSpec(0.2), 4.0, 100.0)

    def test_up_drift_needs_no_right_tail(self):
        # no upward tail, so any power of g is integrable
        value = drift_quadrature(UP, OPPOSING_LAW, LyapunovSpec(0.5), 4.0, 100.0)
        assert math.isfinite(value)

    def test_bad_state(self):
        with pytest.raises(DomainError):
            drift_quadrature(DOWN, RECURRENT_LAW, LyapunovSpec(0.2), 1.0, 0.0)


class TestDriftAsymptotic:
    """Leading-order drift."""

    def test_quadrature_ratio_at_large_x(self):
        lyap = LyapunovSpec(0.2)
        ratio = drift_quadrature(DOWN, RECURRENT_LAW, lyap, 1.0, 1e6) / drift_asymptotic(DOWN, RECURRENT_LAW, 0.2, 1e6).value
        assert 0.8 <= ratio <= 1.2

    @pytest.mark.parametrize("model,dist,delta", [
        (DOWN, RECURRENT_LAW, 0.2),
        (DOWN, TRANSIENT_LAW, -0.2),
        (UP, OPPOSING_LAW, 0.5),
    ])
    def test_sign_agreement(self, model, dist, delta):
        lyap = LyapunovSpec(delta, clipped=delta < 0)
        for x in geometric_grid(1e4, 1e6, 4):
            quad = drift_quadrature(model, dist, lyap, 1.0, x)
            asym = drift_asymptotic(model, dist, delta, x).value
            assert np.sign(quad) == np.sign(asym)

    def test_oscillating_band(self):
        dist = InnovationSpec(theta_right=0.7, c_right=0.2, c_profile="oscillating", amplitude=0.3)
        asym = drift_asymptotic(DOWN, dist, 0.2, 1e4)
        assert asym.lower < asym.value < asym.upper

    def test_below_floor(self):
        with pytest.raises(DomainError):
            drift_asymptotic(DOWN, RECURRENT_LAW, 0.2, 5.0)

    def test_missing_tail(self):
        with pytest.raises(DomainError):
            drift_asymptotic(UP, RECURRENT_LAW, 0.2, 100.0)


class TestPartition:
    """Four-cell decomposition of Dg."""

    @pytest.mark.parametrize("model,dist,delta", [
        (DOWN, RECURRENT_LAW, 0.2),
        (DOWN, InnovationSpec(side="two-sided", theta_right=0.7, theta_left=0.4, c_right=0.1, c_left=0.1), 0.2),
        (UP, OPPOSING_LAW, 0.5),
        (DOWN, TRANSIENT_LAW, -0.2),
    ])
    @pytest.mark.parametrize("x", [50.0, 1e3, 1e5])
    def test_sum_identity(self, model, dist, delta, x):
        lyap = LyapunovSpec(delta, clipped=delta < 0)
        beta = 0.4
        parts = partition_decomposition(model, dist, lyap, x, beta)
        whole = drift_quadrature(model, dist, lyap, 1.0, x, partition_breakpoints(x, beta))
        assert abs(parts.total - whole) <= 1e-10 * max(1.0, abs(whole))

    def test_one_sided_cells_vanish(self):
        parts = partition_decomposition(DOWN, RECURRENT_LAW, LyapunovSpec(0.2), 1e3, 0.4)
        assert parts.terms[0] == 0.0
        assert parts.terms[1] == 0.0

    def test_bad_arguments(self):
        with pytest.raises(DomainError):
            partition_decomposition(DOWN, RECURRENT_LAW, LyapunovSpec(0.2), 1.0, 0.5)
        with pytest.raises(DomainError):
            partition_decomposition(DOWN, RECURRENT_LAW, LyapunovSpec(0.2), 100.0, 1.0)


class TestCheckCondition:
    """Grid certificates."""

    def test_recurrence_certificate(self):
        report = check_condition(DOWN, RECURRENT_LAW, LyapunovSpec(0.2),
                                 Condition(ConditionKind.T2_1_RECURRENCE), geometric_grid(1e2, 1e6, 64))
        assert report.holds
        assert all(v < 0 for v in report.dg_values)
        assert report.witness["max_dg"] < 0

    def test_transience_certificate(self):
        report = check_condition(DOWN, TRANSIENT_LAW, LyapunovSpec(-0.2, clipped=True),
                                 Condition(ConditionKind.T2_1_TRANSIENCE), GRID)
        assert report.holds
        assert report.witness["y"] == pytest.approx(GRID[0])
        assert report.witness["inf_g_on_A"] == pytest.approx(2.0 ** -0.2)

    def test_up_drift_recurrence(self):
        report = check_condition(UP, OPPOSING_LAW, LyapunovSpec(0.5),
                                 Condition(ConditionKind.T2_1_RECURRENCE), GRID)
        assert report.holds

    def test_recurrence_fails_in_transient_regime(self):
        report = check_condition(DOWN, TRANSIENT_LAW, LyapunovSpec(0.1),
                                 Condition(ConditionKind.T2_1_RECURRENCE), geometric_grid(1e4, 1e6, 8))
        assert not report.holds
        assert report.to_dict()["failures"] > 0

    def test_moment_upper(self):
        # p * delta = 0.5 < theta = 0.7
        report = check_condition(DOWN, RECURRENT_LAW, LyapunovSpec(0.25),
                                 Condition(ConditionKind.T2_2_MOMENT_UPPER, p=2.0), geometric_grid(1e3, 1e6, 8))
        assert report.power == 2.0
        assert report.witness["c"] > 0
        assert report.holds

    def test_moment_lower_reports_constants(self):
        report = check_condition(DOWN, RECURRENT_LAW, LyapunovSpec(0.2),
                                 Condition(ConditionKind.T2_2_MOMENT_LOWER, p=3.0, r=2.0), geometric_grid(1e3, 1e5, 4))
        assert {"c1", "c2", "min_dg_p"} <= set(report.witness)
        assert report.witness["c1"] >= 0

    def test_moment_divergence(self):
        with pytest.raises(DivergenceError):
            check_condition(DOWN, RECURRENT_LAW, LyapunovSpec(0.2),
                            Condition(ConditionKind.T2_2_MOMENT_UPPER, p=4.0), GRID)

    def test_grid_inside_target(self):
        with pytest.raises(DomainError):
            check_condition(DOWN, RECURRENT_LAW, LyapunovSpec(0.2),
                            Condition(ConditionKind.T2_1_RECURRENCE), [1.0, 10.0])

    def test_grid_not_increasing(self):
        with pytest.raises(DomainError):
            check_condition(DOWN, RECURRENT_LAW, LyapunovSpec(0.2),
                            Condition(ConditionKind.T2_1_RECURRENCE), [100.0, 10.0])

    def test_recurrence_needs_unbounded_g(self):
        with pytest.raises(DomainError):
            check_condition(DOWN, RECURRENT_LAW, LyapunovSpec(-0.2, clipped=True),
                            Condition(ConditionKind.T2_1_RECURRENCE), GRID)

    def test_report_files(self, tmp_path):
        report = check_condition(DOWN, RECURRENT_LAW, LyapunovSpec(0.2),
                                 Condition(ConditionKind.T2_1_RECURRENCE), geometric_grid(1e2, 1e3, 4))
        lines = report.write_csv(tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == REPORT_SCHEMA
        assert lines[1] == "x,dg,asymptotic,verdict"
        assert len(lines) == 2 + len(report.x_grid)
        data = json.loads(report.write_json(tmp_path / "r.json").read_text())
        assert data["holds"] is True
        assert data["note"] == GRID_NOTE
        assert data["grid"]["points"] == len(report.x_grid)


class TestGeometricGrid:

    def test_endpoints_and_count(self):
        grid = geometric_grid(1e2, 1e6, 64)
        assert grid[0] == pytest.approx(1e2)
        assert grid[-1] == pytest.approx(1e6)
        assert len(grid) == 257

    def test_bad_range(self):
        with pytest.raises(DomainError):
            geometric_grid(10.0, 1.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
