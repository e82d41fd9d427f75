import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bellkit.geometry import (
    Setting,
    bell_violation,
    chsh_quantum,
    chsh_quantum_max,
    quantum_corr,
    theta_scan,
)

SQRT2 = math.sqrt(2)
angles = st.floats(min_value=0.0, max_value=2 * math.pi, allow_nan=False)


class TestSetting:
    def test_angle_to_vector(self):
        s = Setting.from_angle(math.pi / 2)
        assert s.vector == pytest.approx((0.0, 1.0, 0.0), abs=1e-16)

    def test_vector_must_be_unit(self):
        with pytest.raises(ValueError):
            Setting.from_vector((1.0, 1.0, 0.0))
        Setting.from_vector((0.6, 0.8))

    def test_vector_must_be_3d(self):
        with pytest.raises(ValueError):
            Setting.from_vector((1.0, 0.0, 0.0, 0.0))

    def test_angles_wrap(self):
        assert Setting.from_angle(2 * math.pi + 0.5).angle == pytest.approx(0.5)


class TestQuantumCorr:
    def test_parallel(self):
        assert quantum_corr(0.7, 0.7) == -1.0
        assert quantum_corr((0, 0, 1), (0, 0, 1)) == -1.0

    def test_orthogonal(self):
        assert quantum_corr((1, 0, 0), (0, 1, 0)) == 0.0

    def test_planar(self):
        assert quantum_corr(0.0, math.pi / 4) == pytest.approx(-0.7071067811865476, abs=1e-15)

    def test_random_directions(self):
        gen = np.random.default_rng(0)
        v = gen.normal(size=(100_000, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        w = np.roll(v, 1, axis=0)
        corr = -np.einsum("ij,ij->i", v, w)
        assert np.all(np.abs(corr) <= 1 + 1e-12)
        assert np.allclose(-np.einsum("ij,ij->i", v, v), -1.0, atol=1e-12)
        for k in range(0, 100_000, 10_000):
            assert quantum_corr(v[k], w[k]) == pytest.approx(corr[k], abs=1e-15)

    @given(angles, angles)
    def test_symmetric(self, x, y):
        assert quantum_corr(x, y) == quantum_corr(y, x)


class TestBellViolation:
    def test_violating_configuration(self):
        r = bell_violation(0.0, math.pi / 4, math.pi / 2)
        assert abs(r.lhs - SQRT2) <= 1e-12 and r.rhs == pytest.approx(1.0, abs=1e-15) and not r.holds

    def test_parallel(self):
        r = bell_violation(0.4, 0.4, 0.4)
        assert r.lhs == 2.0 and r.rhs == 2.0 and r.tight

    def test_boundary(self):
        r = bell_violation(0.0, 0.0, math.pi / 2)
        assert r.lhs == pytest.approx(1.0) and r.holds and r.tight

    def test_vector_settings(self):
        b = (math.cos(math.pi / 4), math.sin(math.pi / 4), 0.0)
        r = bell_violation((1, 0, 0), b, (0, 1, 0))
        assert r.lhs == pytest.approx(SQRT2, abs=1e-12) and not r.holds

    @given(st.sampled_from([0.0, math.pi]), st.sampled_from([0.0, math.pi]), st.sampled_from([0.0, math.pi]),
           angles)
    def test_parallel_or_antiparallel_holds(self, da, db, dc, base):
        assert bell_violation(base + da, base + db, base + dc).holds

    def test_violated_on_open_interval(self):
        for t in np.linspace(0, math.pi / 2, 1001)[1:-1]:
            r = bell_violation(0.0, t, math.pi / 2)
            assert r.margin == pytest.approx(math.cos(t) + math.sin(t) - 1, abs=1e-12)
            assert r.margin > 0


class TestThetaScan:
    def test_three_points(self):
        s = theta_scan(3)
        assert s.theta.tolist() == pytest.approx([0.0, math.pi / 4, math.pi / 2])
        assert s.value.tolist() == pytest.approx([1.0, SQRT2, 1.0], abs=1e-15)

    def test_two_points(self):
        assert theta_scan(2).value.tolist() == pytest.approx([1.0, 1.0], abs=1e-15)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            theta_scan(1)

    def test_dense(self):
        assert abs(theta_scan(10**6).max - SQRT2) <= 1e-11

    def test_monotone_convergence(self):
        gaps = [SQRT2 - theta_scan(n).max for n in (10, 100, 1000, 10_000)]
        assert all(g >= 0 for g in gaps)
        assert gaps == sorted(gaps, reverse=True) and gaps[-1] < gaps[0]
        # Quadratic around the maximum: each decade divides the gap by about 100.
        for g0, g1 in zip(gaps[1:], gaps[2:]):
            assert 50 < g0 / g1 < 200

    def test_never_above_sqrt2(self):
        for n in (2, 3, 5, 101, 4096):
            s = theta_scan(n)
            assert s.max <= SQRT2 + 1e-12
            assert abs(s.argmax - math.pi / 4) <= s.step


class TestChsh:
    def test_degenerate(self):
        for a, b in [(0.0, 0.3), (1.0, 2.5)]:
            assert chsh_quantum(a, a, b, b) == pytest.approx(2 * abs(math.cos(a - b)))
            assert chsh_quantum(a, a, b, b) <= 2

    def test_analytic_stationary_point(self):
        v = chsh_quantum(0.0, math.pi / 2, math.pi / 4, -math.pi / 4)
        assert v == pytest.approx(2 * SQRT2, abs=1e-15)

    def test_b_prime_at_three_quarters_cancels(self):
        # With b' = 3 pi/4 the four terms cancel in pairs.
        assert chsh_quantum(0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4) == pytest.approx(0.0, abs=1e-15)

    def test_grid_maximum(self):
        r = chsh_quantum_max(360)
        assert abs(r.value - 2 * SQRT2) < 1e-3
        assert r.refined_value <= 2 * SQRT2 + 1e-9
        assert chsh_quantum(*r.angles) == pytest.approx(r.value)

    def test_coarse_grid_is_below_ceiling(self):
        r = chsh_quantum_max(10)
        assert r.value <= 2 * SQRT2 + 1e-9
        assert r.refined_value >= r.value

    def test_resolution_check(self):
        with pytest.raises(ValueError):
            chsh_quantum_max(4)
