"""Shared IIR filter and single-bin DFT primitives.

Used by the relay chain and by the waveform resampler; kept separate so the
two modules do not import each other.
"""

from __future__ import annotations

import numpy as np


def butterworth_lowpass(order: int, cutoff_hz: float, fs_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """Design a digital low-pass Butterworth filter.

    Analog prototype poles are placed on the unit circle, scaled to the
    prewarped cutoff, and mapped with the bilinear transform. DC gain is
    normalized to exactly 1.

    Returns:
        (b, a) transfer-function coefficients, both length order+1.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if not 0 < cutoff_hz < fs_hz / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz must lie in (0, fs/2) for fs={fs_hz} Hz")
    k = np.arange(1, order + 1)
    prototype = np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))
    warped = 2.0 * fs_hz * np.tan(np.pi * cutoff_hz / fs_hz)
    poles = warped * prototype
    fs2 = 2.0 * fs_hz
    z_poles = (fs2 + poles) / (fs2 - poles)
    z_zeros = -np.ones(order)
    b = np.real(np.poly(z_zeros))
    a = np.real(np.poly(z_poles))
    b = b * (a.sum() / b.sum())
    return b, a


def iir_filter(b: np.ndarray, a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply an IIR filter along the last axis (direct form II transposed)."""
    b = np.asarray(b, dtype=float)
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if a[0] != 1.0:
        b = b / a[0]
        a = a / a[0]
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    n_state = max(len(a), len(b)) - 1
    bp = np.zeros(n_state + 1)
    ap = np.zeros(n_state + 1)
    bp[: len(b)] = b
    ap[: len(a)] = a
    y = np.empty_like(x2)
    for row in range(x2.shape[0]):
        z = np.zeros(n_state)
        xi = x2[row]
        yi = y[row]
        for n in range(xi.shape[0]):
            out = bp[0] * xi[n] + z[0]
            for s in range(n_state - 1):
                z[s] = bp[s + 1] * xi[n] + z[s + 1] - ap[s + 1] * out
            z[n_state - 1] = bp[n_state] * xi[n] - ap[n_state] * out
            yi[n] = out
    return y[0] if single else y


def frequency_response(b: np.ndarray, a: np.ndarray, freq_hz: np.ndarray | float, fs_hz: float) -> np.ndarray:
    """Complex response H(e^{j2*pi*f/fs}) of a (b, a) filter."""
    f = np.atleast_1d(np.asarray(freq_hz, dtype=float))
    z = np.exp(2j * np.pi * f / fs_hz)
    orders = np.arange(max(len(b), len(a)))
    zm = z[:, None] ** (-orders[None, :])
    num = zm[:, : len(b)] @ np.asarray(b, dtype=float)
    den = zm[:, : len(a)] @ np.asarray(a, dtype=float)
    h = num / den
    return h if np.ndim(freq_hz) else h[0]


def dft_bin(x: np.ndarray, bin_index: int) -> complex:
    """Single DFT bin sum(x[n] * exp(-2j*pi*k*n/N)) without the 1/N factor."""
    x = np.asarray(x, dtype=float)
    n = np.arange(x.shape[0])
    return complex(np.sum(x * np.exp(-2j * np.pi * bin_index * n / x.shape[0])))


def fundamental_amplitude(x: np.ndarray, fs_hz: float, freq_hz: float) -> float:
    """Amplitude of a single frequency component estimated over the full window."""
    x = np.asarray(x, dtype=float)
    t = np.arange(x.shape[0]) / fs_hz
    c = np.exp(-2j * np.pi * freq_hz * t)
    return float(2.0 * np.abs(np.sum(x * c)) / x.shape[0])
