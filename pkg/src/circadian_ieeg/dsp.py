"""Numerical DSP primitives: Chebyshev-II design, zero-phase filtering,
decimation, Hilbert envelope and Welch band power."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import signal

from .errors import NumericalError

__all__ = [
    "IirFilter",
    "design_cheby2",
    "design_band",
    "filtfilt",
    "filtfilt_cascade",
    "bandpass",
    "decimate_to",
    "hilbert_envelope",
    "welch_psd",
    "band_power",
    "band_power_from_psd",
]


@dataclass(frozen=True)
class IirFilter:
    """Digital IIR filter in transfer-function and second-order-section form.

    ``b`` and ``a`` are the polynomial coefficients (``a[0] == 1``); ``sos``
    holds the same filter factored into biquads and is what :func:`filtfilt`
    runs, because high-order polynomials at low normalized cutoffs lose
    precision.
    """

    b: np.ndarray
    a: np.ndarray
    sos: np.ndarray
    fs: float
    family: str
    order: int
    cutoff_hz: float
    stopband_atten_db: float
    kind: str

    @property
    def poles(self) -> np.ndarray:
        _, p, _ = signal.sos2zpk(self.sos)
        return p

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles) < 1.0))

    def response(self, freqs_hz) -> np.ndarray:
        """Complex frequency response at ``freqs_hz``."""
        _, h = signal.sosfreqz(self.sos, worN=np.atleast_1d(np.asarray(freqs_hz, float)), fs=self.fs)
        return h


def design_cheby2(order: int, cutoff_hz: float, fs: float, kind: str = "lowpass",
                  stopband_atten_db: float = 40.0) -> IirFilter:
    """Design a Chebyshev type II lowpass or highpass filter.

    ``cutoff_hz`` is the stopband edge: the gain there equals
    ``-stopband_atten_db`` and the passband lies on the other side of it.
    """
    if int(order) != order or order < 1:
        raise ValueError(f"order must be a positive integer, got {order!r}")
    if fs <= 0:
        raise ValueError("fs must be positive")
    if not 0 < cutoff_hz < fs / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz must lie strictly inside (0, Nyquist={fs / 2})")
    if kind not in ("lowpass", "highpass"):
        raise ValueError(f"unknown filter kind {kind!r}")
    if stopband_atten_db <= 0:
        raise ValueError("stopband attenuation must be positive")

    sos = signal.cheby2(int(order), stopband_atten_db, cutoff_hz, btype=kind, fs=fs, output="sos")
    b, a = signal.sos2tf(sos)
    b = b / a[0]
    a = a / a[0]
    f = IirFilter(b=b, a=a, sos=sos, fs=float(fs), family="cheby2", order=int(order),
                  cutoff_hz=float(cutoff_hz), stopband_atten_db=float(stopband_atten_db), kind=kind)
    if not f.is_stable():
        raise NumericalError(f"unstable {kind} design at {cutoff_hz} Hz, fs {fs} Hz")
    return f


def design_band(lo_hz: float, hi_hz: float, fs: float, order: int = 8,
                stopband_atten_db: float = 40.0) -> list[IirFilter]:
    """Highpass at ``lo_hz`` followed by lowpass at ``hi_hz``.

    The lowpass stage is omitted when ``hi_hz`` reaches Nyquist, where the
    sampling itself bounds the band.
    """
    if not 0 < lo_hz < hi_hz:
        raise ValueError("band edges must satisfy 0 < lo < hi")
    stages = [design_cheby2(order, lo_hz, fs, "highpass", stopband_atten_db)]
    if hi_hz < fs / 2:
        stages.append(design_cheby2(order, hi_hz, fs, "lowpass", stopband_atten_db))
    return stages


def _padlen(f: IirFilter) -> int:
    return 3 * max(len(f.a), len(f.b))


def filtfilt(f: IirFilter, x) -> np.ndarray:
    """Zero-phase filtering with odd reflection padding.

    The forward-backward and backward-forward passes differ only in their
    edge transients; averaging them makes the result commute exactly with
    time reversal while leaving the interior unchanged.
    """
    x = np.asarray(x, dtype=float)
    padlen = _padlen(f)
    if x.shape[-1] <= padlen:
        raise ValueError(f"signal too short: {x.shape[-1]} samples, need more than {padlen}")
    fb = signal.sosfiltfilt(f.sos, x, axis=-1, padtype="odd", padlen=padlen)
    bf = np.flip(signal.sosfiltfilt(f.sos, np.flip(x, axis=-1), axis=-1, padtype="odd",
                                    padlen=padlen), axis=-1)
    return 0.5 * (fb + bf)


def filtfilt_cascade(stages: Sequence[IirFilter], x) -> np.ndarray:
    y = np.asarray(x, dtype=float)
    for f in stages:
        y = filtfilt(f, y)
    return y


def bandpass(x, fs: float, lo_hz: float, hi_hz: float, order: int = 8,
             stopband_atten_db: float = 40.0) -> np.ndarray:
    return filtfilt_cascade(design_band(lo_hz, hi_hz, fs, order, stopband_atten_db), x)


def decimate_to(x, fs_in: float, fs_out: float, order: int = 8,
                stopband_atten_db: float = 40.0) -> np.ndarray:
    """Resample ``x`` from ``fs_in`` down to ``fs_out``.

    Integer ratios use a zero-phase Chebyshev-II anti-alias lowpass at 0.8 of
    the output Nyquist followed by keeping every M-th sample; other rational
    ratios go through polyphase resampling.
    """
    x = np.asarray(x, dtype=float)
    if fs_out <= 0 or fs_in < fs_out:
        raise ValueError(f"cannot decimate from {fs_in} Hz to {fs_out} Hz")
    if fs_in == fs_out:
        return x.copy()
    ratio = Fraction(fs_in / fs_out).limit_denominator(1000)
    if abs(float(ratio) - fs_in / fs_out) > 1e-9 * fs_in / fs_out:
        raise ValueError(f"unsupported resampling ratio {fs_in}/{fs_out}")
    if ratio.denominator == 1:
        m = ratio.numerator
        aa = design_cheby2(order, 0.8 * fs_out / 2, fs_in, "lowpass", stopband_atten_db)
        return filtfilt(aa, x)[..., ::m]
    return signal.resample_poly(x, ratio.denominator, ratio.numerator, axis=-1)


def hilbert_envelope(x) -> np.ndarray:
    """Magnitude of the FFT-based analytic signal of ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise ValueError("hilbert_envelope needs at least 2 samples")
    env = np.abs(signal.hilbert(x, axis=-1))
    if not np.isfinite(env).all() and np.isfinite(x).all():
        raise NumericalError("analytic signal overflowed")
    return env


def welch_psd(x, fs: float, seg_len: int | None = None, overlap: float = 0.5):
    """One-sided Welch PSD with a Hann window and no detrending.

    ``seg_len`` defaults to 2 s worth of samples.
    """
    x = np.asarray(x, dtype=float)
    if seg_len is None:
        seg_len = int(round(2.0 * fs))
    seg_len = int(seg_len)
    if seg_len < 1 or seg_len > x.shape[-1]:
        raise ValueError(f"segment length {seg_len} exceeds signal length {x.shape[-1]}")
    if not 0 <= overlap < 1:
        raise ValueError("overlap must lie in [0, 1)")
    noverlap = int(round(overlap * seg_len))
    freqs, psd = signal.welch(x, fs=fs, window="hann", nperseg=seg_len, noverlap=noverlap,
                              detrend=False, scaling="density", axis=-1)
    return freqs, psd


def band_power_from_psd(freqs, psd, lo_hz: float, hi_hz: float):
    """Rectangle-rule integral of ``psd`` over bins in ``[lo_hz, hi_hz)``.

    The Nyquist bin is included when ``hi_hz`` equals the top of the grid,
    so adjacent bands add up exactly and ``[0, fs/2]`` recovers the total.
    """
    freqs = np.asarray(freqs)
    psd = np.asarray(psd)
    if not 0 <= lo_hz < hi_hz:
        raise ValueError("band must satisfy 0 <= lo < hi")
    if hi_hz > freqs[-1] + 1e-9:
        raise ValueError(f"band [{lo_hz}, {hi_hz}] extends beyond Nyquist {freqs[-1]}")
    df = freqs[1] - freqs[0]
    mask = (freqs >= lo_hz - 1e-9 * df) & (freqs < hi_hz - 1e-9 * df)
    if abs(hi_hz - freqs[-1]) <= 1e-9 * df:
        mask[-1] = True
    return np.sum(psd[..., mask], axis=-1) * df


def band_power(x, fs: float, lo_hz: float, hi_hz: float, seg_len: int | None = None,
               overlap: float = 0.5):
    """Power of ``x`` in ``[lo_hz, hi_hz)`` from its Welch PSD."""
    if hi_hz > fs / 2 + 1e-12:
        raise ValueError(f"band [{lo_hz}, {hi_hz}] extends beyond Nyquist {fs / 2}")
    x = np.asarray(x, dtype=float)
    if seg_len is None:
        seg_len = min(int(round(2.0 * fs)), x.shape[-1])
    freqs, psd = welch_psd(x, fs, seg_len, overlap)
    return band_power_from_psd(freqs, psd, lo_hz, hi_hz)
