"""Windowed spectral analysis of vertical acceleration.

The power spectrum of an ``N``-sample window ``a`` is

    A(w) = |a_hat(w)|**2 / N,    a_hat = orthonormal DFT of the tapered window

reported one-sided on bins ``0 .. N//2`` with the negative-frequency half
folded in, so that ``N * sum(A) == sum(a**2)`` for a rectangular taper.
``A.sum()`` is therefore the mean power per sample of the window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrumError, InsufficientDataError, SignalValidityError


class AccelWindow:
    """Fixed-capacity ring buffer of the most recent vertical accelerations."""

    def __init__(self, capacity: int = 32, sample_rate: float = 200.0):
        if int(capacity) != capacity or capacity < 8:
            raise ValueError(f"window capacity must be an integer >= 8, got {capacity}")
        if not sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        self.capacity = int(capacity)
        self.sample_rate = float(sample_rate)
        self._buf = np.zeros(self.capacity)
        self._head = 0  # next write position
        self._fill = 0

    @property
    def fill(self) -> int:
        return self._fill

    @property
    def is_full(self) -> bool:
        return self._fill == self.capacity

    def __len__(self) -> int:
        return self._fill

    def push(self, acc_z: float) -> "AccelWindow":
        acc_z = float(acc_z)
        if not math.isfinite(acc_z):
            raise SignalValidityError(f"non-finite acceleration sample: {acc_z}")
        self._buf[self._head] = acc_z
        self._head = (self._head + 1) % self.capacity
        if self._fill < self.capacity:
            self._fill += 1
        return self

    def values(self) -> np.ndarray:
        """Samples ordered oldest to newest (a copy)."""
        if self._fill < self.capacity:
            return self._buf[: self._fill].copy()
        return np.concatenate((self._buf[self._head:], self._buf[: self._head]))

    def copy(self) -> "AccelWindow":
        other = AccelWindow(self.capacity, self.sample_rate)
        other._buf = self._buf.copy()
        other._head = self._head
        other._fill = self._fill
        return other

    def __repr__(self) -> str:
        return f"AccelWindow(capacity={self.capacity}, fill={self._fill}, sample_rate={self.sample_rate})"


def push_sample(window: AccelWindow, acc_z: float) -> AccelWindow:
    """Append ``acc_z`` to ``window``, evicting the oldest sample when full."""
    return window.push(acc_z)


@dataclass(frozen=True)
class PowerSpectrum:
    bins: np.ndarray
    bin_width: float

    @property
    def total_power(self) -> float:
        return float(self.bins.sum())

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.bins.size) * self.bin_width


def taper_window(n: int, taper: str = "rectangular") -> np.ndarray:
    if taper == "rectangular":
        return np.ones(n)
    if taper == "hann":
        # periodic Hann, the usual STFT choice
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    raise ValueError(f"unknown taper {taper!r}")


def power_rows(frames: np.ndarray, taper: str = "rectangular", detrend: bool = False) -> np.ndarray:
    """One-sided folded power spectra for each row of ``frames`` (shape ``(T, N)``)."""
    frames = np.asarray(frames, dtype=float)
    n = frames.shape[-1]
    if detrend:
        frames = frames - frames.mean(axis=-1, keepdims=True)
    if taper != "rectangular":
        frames = frames * taper_window(n, taper)
    spec = np.fft.rfft(frames, axis=-1)
    power = (spec.real**2 + spec.imag**2) / (n * n)
    # fold negative frequencies; DC and (even-N) Nyquist have no mirror
    stop = power.shape[-1] - 1 if n % 2 == 0 else power.shape[-1]
    power[..., 1:stop] *= 2.0
    return power


def power_spectrum(window: AccelWindow, taper: str = "rectangular", detrend: bool = False) -> PowerSpectrum:
    """Power spectrum of a full acceleration window.

    Raises
    ------
    InsufficientDataError
        If the window holds fewer than ``capacity`` samples.
    """
    if not window.is_full:
        raise InsufficientDataError(
            f"window holds {window.fill} of {window.capacity} samples; spectrum needs a full window"
        )
    bins = power_rows(window.values()[None, :], taper=taper, detrend=detrend)[0]
    return PowerSpectrum(bins=bins, bin_width=window.sample_rate / window.capacity)


def median_rows(power: np.ndarray) -> np.ndarray:
    """Half-mass bin index for each row of ``power``; NaN for zero-power rows.

    Bin ``k`` is treated as a uniform mass on ``[k - 0.5, k + 0.5]`` so the
    cumulative power is piecewise linear and the crossing of half the total
    is found by linear interpolation inside the bin that straddles it.
    When the half-mass point falls on a gap of empty bins the midpoint of
    the gap is returned.
    """
    power = np.atleast_2d(np.asarray(power, dtype=float))
    rows = power.shape[0]
    cum = np.cumsum(power, axis=1)
    total = cum[:, -1]
    half = 0.5 * total
    out = np.full(rows, np.nan)
    ok = total > 0
    if not ok.any():
        return out
    c, h, p = cum[ok], half[ok], power[ok]
    r = np.arange(c.shape[0])
    k = np.argmax(c >= h[:, None], axis=1)
    prev = np.where(k > 0, c[r, np.maximum(k - 1, 0)], 0.0)
    med = k - 0.5 + (h - prev) / p[r, k]
    # exact hit on a bin edge followed by empty bins: take the middle of the flat stretch
    edge = c[r, k] == h
    for i in np.flatnonzero(edge):
        later = np.flatnonzero(p[i, k[i] + 1:] > 0)
        if later.size and later[0] > 0:
            med[i] = k[i] + 0.5 + 0.5 * later[0]
    out[ok] = med
    return out


def median_frequency(spec: PowerSpectrum) -> float:
    """Fractional bin index splitting the spectrum's power into equal halves.

    Raises
    ------
    DegenerateSpectrumError
        If the spectrum has zero total power.
    """
    bins = np.asarray(spec.bins, dtype=float)
    if np.any(bins < 0) or not np.all(np.isfinite(bins)):
        raise ValueError("power bins must be finite and non-negative")
    med = median_rows(bins[None, :])[0]
    if math.isnan(med):
        raise DegenerateSpectrumError("median frequency undefined for a zero-power spectrum")
    return float(med)
