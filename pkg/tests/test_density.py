import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactbayes.density import (KdeModel, TorqueSample, exact_log_density, fit_kde, likelihood, log_likelihood,
                                  scott_bandwidth)
from contactbayes.errors import FitError
from tests.oracles import kernel_sum, kernel_sum_many


def blob(rng, n=500):
    pts = np.column_stack((rng.normal(10, 2, n), rng.normal(3, 1, n)))
    return np.abs(pts)


class TestTorqueSample:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            TorqueSample(-1.0, 0.0)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            TorqueSample(0.0, math.nan)

    def test_from_signed(self):
        assert TorqueSample.from_signed(-4.0, 2.0) == TorqueSample(4.0, 2.0)


class TestScott:
    def test_needs_two_samples(self):
        with pytest.raises(FitError):
            scott_bandwidth(1, 2, [1.0, 1.0])

    @pytest.mark.parametrize("n", [2, 10, 1000])
    def test_unit_variance(self, n):
        assert scott_bandwidth(n, 2, [1.0, 1.0]) == pytest.approx(n ** (-1 / 6))

    def test_geometric_mean(self):
        assert scott_bandwidth(64, 2, [4.0, 1.0]) == pytest.approx(64 ** (-1 / 6) * 2.0)

    def test_zero_spread_names_axis(self):
        with pytest.raises(FitError, match="tau_wheel"):
            scott_bandwidth(10, 2, [1.0, 0.0])


class TestFit:
    def test_rejects_single_point(self):
        with pytest.raises(FitError):
            fit_kde([[1.0, 1.0]], "C")

    def test_rejects_empty(self):
        with pytest.raises(FitError):
            fit_kde(np.zeros((0, 2)), "C")

    def test_rejects_non_finite_naming_axis(self):
        with pytest.raises(FitError, match="tau_knee"):
            fit_kde([[math.nan, 1.0], [1.0, 2.0]], "C")

    def test_degenerate_axis_named(self):
        with pytest.raises(FitError, match="tau_wheel"):
            fit_kde([[0.0, 0.0], [2.0, 0.0]], "C")

    def test_rejects_signed(self):
        with pytest.raises(FitError, match="absolute"):
            fit_kde([[-1.0, 1.0], [1.0, 2.0]], "C")

    def test_accepts_torque_samples(self):
        model = fit_kde([TorqueSample(1.0, 2.0), TorqueSample(2.0, 1.0), TorqueSample(3.0, 3.0)], "NC")
        assert model.sample_count == 3

    def test_two_point_closed_form(self):
        h = 0.5
        model = fit_kde([[0.0, 0.0], [2.0, 0.0]], "C", bandwidth=h)
        expected = math.exp(-1 / (2 * h * h)) / (2 * math.pi * h * h)
        assert likelihood(model, TorqueSample(1.0, 0.0)) == pytest.approx(expected, rel=1e-3)

    def test_duplicated_point_peaks_at_nearest_node(self):
        model = fit_kde(np.tile([[3.3, 1.7]], (20, 1)), "C", bandwidth=0.4)
        xs, ys = model.node_coordinates()
        i, j = np.unravel_index(np.argmax(model.grid), model.grid.shape)
        # the point may sit halfway between two nodes; either neighbour is "nearest"
        assert abs(xs[i] - 3.3) <= abs(xs - 3.3).min() + 1e-12
        assert abs(ys[j] - 1.7) <= abs(ys - 1.7).min() + 1e-12

    def test_grid_bounds_and_coverage(self, rng):
        pts = blob(rng)
        model = fit_kde(pts, "C")
        h = model.bandwidth
        assert model.resolution == 200
        assert np.allclose(model.lower, pts.min(0) - 3 * h)
        assert np.allclose(model.upper, pts.max(0) + 3 * h)

    def test_mass_close_to_one(self, rng):
        model = fit_kde(blob(rng), "C")
        assert 0.95 <= model.grid_mass() <= 1.01

    def test_500_points_against_kernel_sum(self, rng):
        pts = blob(rng, 500)
        model = fit_kde(pts, "C")
        # in-bounds queries drawn from the density itself
        q = pts[rng.integers(0, 500, 1000)] + model.bandwidth * rng.standard_normal((1000, 2))
        q = np.clip(q, model.lower, model.upper)
        exact = kernel_sum_many(pts, model.bandwidth, q)
        keep = exact > model.floor
        rel = np.abs(np.exp(model.log_density(q[keep])) / exact[keep] - 1)
        assert rel.max() <= 1e-2
        assert rel.mean() <= 1e-3

    def test_exact_log_density_matches_plain_sum(self, rng):
        pts = blob(rng, 50)
        q = pts[:5] + 0.3
        for row, val in zip(q, exact_log_density(pts, 0.7, q)):
            assert math.exp(val) == pytest.approx(kernel_sum(pts, 0.7, row), rel=1e-12)

    def test_deterministic(self, rng):
        pts = blob(rng, 300)
        a, b = fit_kde(pts, "C"), fit_kde(pts, "C")
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


class TestLookup:
    @pytest.fixture(scope="class")
    @classmethod
    def model(cls):
        return fit_kde(blob(np.random.default_rng(5), 400), "C")

    def test_node_values_exact(self, model):
        xs, ys = model.node_coordinates()
        for i, j in [(0, 0), (10, 57), (199, 199), (120, 3)]:
            got = model.log_density([[xs[i], ys[j]]])[0]
            assert got == max(model.grid[i, j], math.log(model.floor))

    def test_cell_midpoint_is_log_average(self, model):
        xs, ys = model.node_coordinates()
        i, j = 80, 90
        q = [[(xs[i] + xs[i + 1]) / 2, (ys[j] + ys[j + 1]) / 2]]
        expected = model.grid[i:i + 2, j:j + 2].mean()
        assert model.log_density(q)[0] == pytest.approx(expected, abs=1e-12)

    def test_far_outside_hits_floor(self, model):
        far = 10 * np.array(model.upper)
        assert likelihood(model, TorqueSample(*far)) == pytest.approx(model.floor)

    def test_continuous_across_cell_edges(self, model):
        xs, ys = model.node_coordinates()
        eps = 1e-9
        y = 0.5 * (ys[40] + ys[41])
        left = model.log_density([[xs[70] - eps, y]])[0]
        right = model.log_density([[xs[70] + eps, y]])[0]
        assert left == pytest.approx(right, abs=1e-6)

    def test_continuous_across_grid_boundary(self, model):
        y = 0.5 * (model.lower[1] + model.upper[1])
        inside = model.log_density([[model.upper[0] - 1e-9, y]])[0]
        outside = model.log_density([[model.upper[0] + 1e-9, y]])[0]
        assert inside == pytest.approx(outside, abs=1e-6)

    @settings(max_examples=100)
    @given(st.floats(0, 1e6), st.floats(0, 1e6))
    def test_always_positive_and_finite(self, model, x, y):
        value = likelihood(model, TorqueSample(x, y))
        assert value >= model.floor and math.isfinite(value)

    def test_log_likelihood_consistent(self, model):
        m = TorqueSample(10.0, 3.0)
        assert math.exp(log_likelihood(model, m)) == likelihood(model, m)
        assert model(m) == likelihood(model, m)

    def test_round_trip_dict(self, model):
        back = KdeModel.from_dict(json.loads(json.dumps(model.to_dict())))
        assert np.array_equal(back.grid, model.grid)
        q = np.array([[9.0, 2.5], [100.0, 100.0], [0.0, 0.0]])
        assert np.array_equal(back.log_density(q), model.log_density(q))
