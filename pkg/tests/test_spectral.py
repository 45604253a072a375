import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from contactbayes.errors import DegenerateSpectrumError, InsufficientDataError, SignalValidityError
from contactbayes.spectral import (AccelWindow, PowerSpectrum, median_frequency, median_rows, power_rows,
                                   power_spectrum, push_sample)
from tests.oracles import bisection_median, naive_power


def full_window(values, rate=200.0):
    w = AccelWindow(len(values), rate)
    for v in values:
        w.push(v)
    return w


finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


class TestAccelWindow:
    def test_push_into_empty(self):
        w = AccelWindow(8)
        push_sample(w, 1.0)
        assert w.fill == 1
        assert w.values().tolist() == [1.0]

    def test_fifo_eviction(self):
        w = full_window([1.0, 2, 3, 4, 5, 6, 7, 8])
        push_sample(w, 9.0)
        assert w.values().tolist() == [2, 3, 4, 5, 6, 7, 8, 9]
        assert w.fill == 8

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_rejects_non_finite(self, bad):
        w = full_window([0.0] * 8)
        with pytest.raises(SignalValidityError):
            w.push(bad)
        assert w.values().tolist() == [0.0] * 8

    def test_capacity_guard(self):
        with pytest.raises(ValueError):
            AccelWindow(4)

    @given(st.lists(finite, min_size=1, max_size=60), st.integers(8, 20))
    def test_holds_most_recent_in_order(self, xs, cap):
        w = AccelWindow(cap)
        for x in xs:
            w.push(x)
        assert w.fill == min(len(xs), cap)
        assert w.values().tolist() == xs[-cap:]

    def test_copy_is_independent(self):
        w = full_window(np.arange(8.0))
        c = w.copy()
        w.push(100.0)
        assert c.values().tolist() == list(range(8))


class TestPowerSpectrum:
    def test_underfull_window(self):
        w = AccelWindow(16)
        w.push(1.0)
        with pytest.raises(InsufficientDataError):
            power_spectrum(w)

    def test_constant_signal_is_dc_only(self):
        spec = power_spectrum(full_window([3.0] * 16))
        assert spec.bins[0] == pytest.approx(9.0)
        assert np.allclose(spec.bins[1:], 0.0, atol=1e-20)

    def test_detrend_removes_dc(self):
        spec = power_spectrum(full_window([3.0] * 16), detrend=True)
        assert np.allclose(spec.bins, 0.0, atol=1e-20)

    @pytest.mark.parametrize("k", [1, 3, 7])
    def test_pure_tone_lands_in_its_bin(self, k):
        n = 32
        x = np.cos(2 * np.pi * k * np.arange(n) / n)
        bins = power_spectrum(full_window(x)).bins
        assert np.argmax(bins) == k
        assert bins[k] == pytest.approx(bins.sum())

    def test_matches_naive_dft_on_random_window(self, rng):
        x = rng.normal(size=16)
        bins = power_spectrum(full_window(x)).bins
        assert np.allclose(bins, naive_power(x), rtol=1e-9, atol=1e-12)

    def test_odd_length_folding(self, rng):
        x = rng.normal(size=9)
        assert np.allclose(power_rows(x[None, :])[0], naive_power(x), rtol=1e-9)

    def test_bin_width_and_frequencies(self):
        spec = power_spectrum(full_window(np.zeros(32), rate=200.0))
        assert spec.bin_width == 6.25
        assert spec.frequencies[-1] == 100.0
        assert spec.bins.size == 17

    def test_hann_taper_changes_spectrum(self, rng):
        x = rng.normal(size=32)
        assert not np.allclose(power_spectrum(full_window(x), taper="hann").bins, power_spectrum(full_window(x)).bins)

    @settings(max_examples=60)
    @given(arrays(np.float64, st.sampled_from([8, 16, 32, 64]), elements=finite))
    def test_parseval_and_nonnegative(self, x):
        bins = power_spectrum(full_window(x)).bins
        assert (bins >= 0).all()
        energy = float(np.dot(x, x))
        assert len(x) * bins.sum() == pytest.approx(energy, rel=1e-6, abs=1e-9)

    @settings(max_examples=60)
    @given(arrays(np.float64, 32, elements=finite))
    def test_total_power_is_bin_sum(self, x):
        spec = power_spectrum(full_window(x))
        assert spec.total_power == pytest.approx(float(np.sum(spec.bins)), rel=1e-9, abs=1e-300)


class TestMedianFrequency:
    def spec(self, bins):
        return PowerSpectrum(np.asarray(bins, dtype=float), 1.0)

    def test_flat_four_bins(self):
        assert median_frequency(self.spec([1, 1, 1, 1])) == 1.5

    def test_all_dc(self):
        assert median_frequency(self.spec([4, 0, 0, 0])) == 0.0

    def test_flat_spectrum_exact_half_index(self):
        assert median_frequency(self.spec(np.ones(33))) == 16.0
        assert median_frequency(self.spec(np.ones(17))) == 8.0

    def test_zero_power(self):
        with pytest.raises(DegenerateSpectrumError):
            median_frequency(self.spec(np.zeros(8)))

    def test_negative_bins_rejected(self):
        with pytest.raises(ValueError):
            median_frequency(self.spec([1, -1, 2]))

    def test_gap_takes_midpoint(self):
        # half the mass ends exactly at the edge of bin 0, bins 1..2 are empty
        assert median_frequency(self.spec([1, 0, 0, 1])) == 1.5

    def test_random_33_bins_match_bisection(self, rng):
        bins = rng.uniform(0, 1, 33)
        assert median_frequency(self.spec(bins)) == pytest.approx(bisection_median(bins), abs=1e-9)

    def test_rows_match_scalar(self, rng):
        power = rng.uniform(0, 1, (5, 17))
        power[2] = 0
        med = median_rows(power)
        assert math.isnan(med[2])
        for i in (0, 1, 3, 4):
            assert med[i] == median_frequency(self.spec(power[i]))

    @given(arrays(np.float64, st.integers(2, 40), elements=st.floats(0.01, 100)), st.floats(1e-3, 1e3))
    def test_scale_invariant(self, bins, lam):
        a = median_frequency(self.spec(bins))
        b = median_frequency(self.spec(bins * lam))
        assert b == pytest.approx(a, abs=1e-9)

    @given(arrays(np.float64, st.integers(3, 40), elements=st.floats(0.0, 100)), st.data())
    def test_shifting_mass_up_never_lowers_median(self, bins, data):
        if bins.sum() <= 0:
            return
        lo = data.draw(st.integers(0, len(bins) - 2))
        hi = data.draw(st.integers(lo + 1, len(bins) - 1))
        moved = bins.copy()
        amount = data.draw(st.floats(0, 1)) * moved[lo]
        moved[lo] -= amount
        moved[hi] += amount
        assert median_frequency(self.spec(moved)) >= median_frequency(self.spec(bins)) - 1e-9

    @given(arrays(np.float64, st.integers(2, 40), elements=st.floats(0.0, 100)))
    def test_within_bin_range(self, bins):
        if bins.sum() <= 0:
            return
        med = median_frequency(self.spec(bins))
        assert -0.5 <= med <= len(bins) - 0.5
