"""
Tests for innovation laws: closed forms, sampling and truncated expectations.

Run with: pytest tests/test_dist.py -v
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.dist import (
    CProfile, InnovationSpec, Part, PointMass, Side, cdf, density, has_negative_mass, mass,
    sample, tail_left, tail_right, truncated_expectation, truncated_expectation_direct,
)
from src.errors import DivergenceError, DomainError
from src.quadrature import integrate, integrate_to_infinity
from src.rng import uniforms


def _total_mass(spec: InnovationSpec) -> float:
    total = integrate(lambda y: density(spec, y), -spec.y0, spec.y0, breakpoints=[0.0]).value
    if spec.params("right"):
        total += integrate_to_infinity(lambda y: density(spec, y), spec.y0, spec.theta_right).value
    if spec.params("left"):
        total += integrate_to_infinity(lambda y: density(spec, -y), spec.y0, spec.theta_left).value
    return total


class TestInnovationSpec:
    """Construction and validation."""

    def test_default_tail_constant(self):
        spec = InnovationSpec(theta_right=0.7)
        assert spec.c_right == pytest.approx(0.35)
        assert spec.tail_mass("right") == pytest.approx(0.5)
        assert spec.body_mass == pytest.approx(0.5)

    @pytest.mark.parametrize("theta_right,theta_left", [(0.7, 0.8), (0.2, 0.3), (0.95, 0.05)])
    def test_two_sided_defaults(self, theta_right, theta_left):
        spec = InnovationSpec(side="two-sided", theta_right=theta_right, theta_left=theta_left)
        assert spec.c_right == pytest.approx(theta_right / 4)
        assert spec.c_left == pytest.approx(theta_left / 4)
        assert spec.tail_mass("right") + spec.tail_mass("left") == pytest.approx(0.5)
        assert spec.body_mass == pytest.approx(0.5)

    def test_two_sided_defaults_oscillating(self):
        spec = InnovationSpec(side="two-sided", theta_right=0.9, theta_left=0.9, y0=3.0,
                              c_profile="oscillating", amplitude=0.99)
        assert 0.0 < spec.body_mass < 1.0

    def test_two_sided_body_split(self):
        spec = InnovationSpec(side=Side.TWO_SIDED, theta_right=0.4, theta_left=0.8, c_right=0.1, c_left=0.1)
        assert spec.body_mass_side("right") == pytest.approx(spec.body_mass / 2)
        assert spec.body_mass_side("left") == pytest.approx(spec.body_mass / 2)

    def test_missing_theta(self):
        with pytest.raises(DomainError):
            InnovationSpec(side=Side.NEGATIVE_ONLY, theta_right=0.5)

    def test_theta_range(self):
        with pytest.raises(DomainError):
            InnovationSpec(theta_right=1.2)

    def test_tails_too_heavy(self):
        with pytest.raises(DomainError):
            InnovationSpec(theta_right=0.2, c_right=0.5)

    def test_amplitude_range(self):
        with pytest.raises(DomainError):
            InnovationSpec(theta_right=0.5, c_profile=CProfile.OSCILLATING, amplitude=1.0)

    def test_c_bounds(self):
        spec = InnovationSpec(theta_right=0.5, c_right=0.1, c_profile="oscillating", amplitude=0.3)
        assert spec.c_bounds("right") == pytest.approx((0.07, 0.13))
        assert spec.c_bounds("left") == (0.0, 0.0)

    def test_negative_mass(self):
        assert not has_negative_mass(InnovationSpec(theta_right=0.5))
        assert has_negative_mass(InnovationSpec(side="negative", theta_left=0.5))
        assert has_negative_mass(PointMass(-1.0))
        assert not has_negative_mass(PointMass(0.0))

    def test_to_dict(self):
        data = InnovationSpec(theta_right=0.5).to_dict()
        assert data["side"] == "positive"
        assert data["c_profile"] == "constant"
        assert "body_mass" in data


class TestClosedForms:
    """Density, tail functions and masses."""

    @pytest.mark.parametrize("spec", [
        InnovationSpec(theta_right=0.7),
        InnovationSpec(side="negative", theta_left=0.3, y0=2.0),
        InnovationSpec(side="two-sided", theta_right=0.5, theta_left=0.8, c_right=0.1, c_left=0.2),
        InnovationSpec(theta_right=0.6, c_right=0.2, c_profile="oscillating", amplitude=0.5),
    ])
    def test_density_integrates_to_one(self, spec):
        assert _total_mass(spec) == pytest.approx(1.0, abs=1e-9)

    def test_tail_matches_density(self):
        spec = InnovationSpec(theta_right=0.6, c_right=0.2, c_profile="oscillating", amplitude=0.5)
        for y in (1.0, 3.0, 40.0):
            expected = integrate_to_infinity(lambda t: density(spec, t), y, 0.6).value
            assert tail_right(spec, y) == pytest.approx(expected, rel=1e-9)

    def test_cdf_monotone(self):
        spec = InnovationSpec(side="two-sided", theta_right=0.5, theta_left=0.8)
        grid = np.linspace(-50, 50, 2001)
        values = cdf(spec, grid)
        assert np.all(np.diff(values) >= 0)
        assert values[0] > 0 and values[-1] < 1

    def test_mass_without_cancellation(self):
        spec = InnovationSpec(theta_right=0.5)
        far = mass(spec, 1e12, math.inf)
        assert far == pytest.approx(tail_right(spec, 1e12), rel=1e-12)
        assert far > 0

    def test_mass_across_zero(self):
        spec = InnovationSpec(side="two-sided", theta_right=0.5, theta_left=0.8)
        assert mass(spec, -2.0, 3.0) == pytest.approx(cdf(spec, 3.0) - cdf(spec, -2.0), abs=1e-14)
        assert mass(spec, -math.inf, math.inf) == pytest.approx(1.0, abs=1e-14)

    def test_worked_example(self):
        spec = InnovationSpec(theta_right=0.5, c_right=0.2)
        assert density(spec, 4.0) == pytest.approx(0.025, rel=1e-14)
        assert density(spec, -1.0) == 0.0
        assert tail_right(spec, 4.0) == pytest.approx(0.2, rel=1e-14)
        assert tail_right(spec, spec.y0) == pytest.approx(spec.tail_mass("right"))

    def test_body_midpoint_sample(self):
        spec = InnovationSpec(theta_right=0.5, c_right=0.2)
        assert sample(spec, 0.5 * spec.body_mass) == pytest.approx(0.5 * spec.y0)
        assert sample(spec, 1.0 - spec.tail_mass("right")) == pytest.approx(spec.y0)

    def test_oscillating_density_bounds(self):
        spec = InnovationSpec(theta_right=0.6, c_right=0.2, c_profile="oscillating", amplitude=0.5)
        b1, b2 = spec.c_bounds("right")
        y = np.geomspace(1.0, 1e6, 500)
        m = density(spec, y)
        assert np.all(m >= b1 * y ** -1.6 * (1 - 1e-12))
        assert np.all(m <= b2 * y ** -1.6 * (1 + 1e-12))

    @settings(max_examples=40, deadline=None)
    @given(
        side=st.sampled_from(["positive", "negative", "two-sided"]),
        theta_right=st.floats(0.05, 0.95),
        theta_left=st.floats(0.05, 0.95),
        fraction=st.one_of(st.none(), st.floats(0.05, 0.7)),
        y0=st.floats(0.5, 4.0),
        amplitude=st.sampled_from([0.0, 0.5]),
    )
    def test_normalised(self, side, theta_right, theta_left, fraction, y0, amplitude):
        # fraction None keeps the default tail constants
        share = 0.5 if side == "two-sided" else 1.0
        consts = {}
        if fraction is not None:
            consts = {"c_right": fraction * share * theta_right * y0 ** theta_right,
                      "c_left": fraction * share * theta_left * y0 ** theta_left}
        spec = InnovationSpec(side=side, theta_right=theta_right, theta_left=theta_left, y0=y0,
                              c_profile="oscillating" if amplitude else "constant", amplitude=amplitude,
                              **consts)
        assert 0.0 < spec.body_mass < 1.0
        assert mass(spec, -math.inf, math.inf) == pytest.approx(1.0, abs=1e-12)
        assert cdf(spec, -1e300) <= 1e-12 and cdf(spec, 1e300) >= 1.0 - 1e-12

    def test_tail_left_at_zero(self):
        spec = InnovationSpec(side="negative", theta_left=0.3)
        assert tail_left(spec, 0.0) == pytest.approx(1.0)
        assert tail_right(spec, 0.0) == 0.0


class TestSampling:
    """Inverse-CDF sampling."""

    N = 200_000

    def _draw(self, spec, seed=3):
        return sample(spec, uniforms(seed, np.arange(self.N), 1))

    @pytest.mark.parametrize("spec", [
        InnovationSpec(theta_right=0.7),
        InnovationSpec(side="two-sided", theta_right=0.5, theta_left=0.8, c_right=0.1, c_left=0.2),
        InnovationSpec(theta_right=0.6, c_right=0.2, c_profile="oscillating", amplitude=0.5),
    ])
    @pytest.mark.parametrize("y", [0.5, 2.0, 30.0])
    def test_empirical_tail(self, spec, y):
        draws = self._draw(spec)
        p = tail_right(spec, y)
        tol = 5.0 * math.sqrt(p * (1 - p) / self.N) + 1e-12
        assert abs(np.mean(draws > y) - p) <= tol

    @pytest.mark.parametrize("spec", [
        InnovationSpec(theta_right=0.7),
        InnovationSpec(side="negative", theta_left=0.3, y0=2.0),
        InnovationSpec(side="two-sided", theta_right=0.5, theta_left=0.8),
        InnovationSpec(theta_right=0.6, c_right=0.2, c_profile="oscillating", amplitude=0.5),
    ])
    def test_kolmogorov_smirnov(self, spec):
        result = stats.kstest(self._draw(spec, seed=17), lambda y: cdf(spec, y))
        assert result.pvalue > 1e-3

    def test_left_tail(self):
        spec = InnovationSpec(side="negative", theta_left=0.3)
        draws = self._draw(spec)
        assert np.all(draws <= 0)
        p = tail_left(spec, 10.0)
        assert abs(np.mean(draws < -10.0) - p) <= 5.0 * math.sqrt(p * (1 - p) / self.N)

    def test_deterministic(self):
        spec = InnovationSpec(theta_right=0.6, c_profile="oscillating", amplitude=0.5)
        u = uniforms(11, np.arange(1000), 4)
        assert np.array_equal(sample(spec, u), sample(spec, u))

    def test_scalar_in_scalar_out(self):
        spec = InnovationSpec(theta_right=0.5)
        assert isinstance(sample(spec, 0.999), float)
        assert sample(spec, 0.999) > spec.y0

    def test_rejects_closed_interval(self):
        with pytest.raises(DomainError):
            sample(InnovationSpec(theta_right=0.5), np.array([0.0, 0.5]))

    def test_lattice(self):
        spec = InnovationSpec(side="two-sided", theta_right=0.5, theta_left=0.8, lattice=True)
        draws = self._draw(spec)
        assert np.all(draws == np.rint(draws))

    def test_point_mass(self):
        assert np.all(sample(PointMass(2.5), np.array([0.1, 0.9])) == 2.5)


class TestTruncatedExpectation:
    """Tail-function identity against direct quadrature."""

    SPEC = InnovationSpec(side="two-sided", theta_right=0.6, theta_left=0.4, c_right=0.15, c_left=0.1)

    @settings(max_examples=20, deadline=None)
    @given(
        delta=st.floats(min_value=0.05, max_value=0.55),
        a=st.floats(min_value=0.0, max_value=5.0),
        width=st.one_of(st.floats(min_value=0.1, max_value=200.0), st.just(math.inf)),
    )
    def test_identity_matches_direct(self, delta, a, width):
        b = a + width
        identity = truncated_expectation(self.SPEC, delta, a, b)
        direct = truncated_expectation_direct(self.SPEC, delta, a, b)
        assert abs(identity - direct) <= 1e-8 * max(1.0, abs(direct))

    def test_negative_part(self):
        identity = truncated_expectation(self.SPEC, 0.3, 0.0, 50.0, part=Part.NEGATIVE)
        direct = truncated_expectation_direct(self.SPEC, 0.3, 0.0, 50.0, part=Part.NEGATIVE)
        assert identity == pytest.approx(direct, rel=1e-8)

    @pytest.mark.parametrize("delta", [0.6, 0.9])
    def test_divergence_at_infinity(self, delta):
        with pytest.raises(DivergenceError):
            truncated_expectation(self.SPEC, delta, 1.0, math.inf)

    def test_finite_window_allows_large_delta(self):
        value = truncated_expectation(self.SPEC, 0.9, 1.0, 100.0)
        assert value == pytest.approx(truncated_expectation_direct(self.SPEC, 0.9, 1.0, 100.0), rel=1e-8)

    def test_empty_window(self):
        assert truncated_expectation(self.SPEC, 0.3, 2.0, 2.0) == 0.0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
