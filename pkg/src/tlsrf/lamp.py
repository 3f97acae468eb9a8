"""Synthetic chaotic light source with a Gaussian spectrum.

The field is a circular complex Gaussian process built by spectral
filtering of white noise, the numerical analogue of a laser beam
scattered off a moving diffuser.  It is parameterized by the
correlation time tau_corr of the intensity autocorrelation fit
1 + A exp(-pi (tau/tau_corr)^2), i.e. |g1(tau)|^2 = exp(-pi
(tau/tau_corr)^2) for the ideal source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from ._accel import njit, prange
from .core import FitError, NumericalGuardError


@dataclass
class FieldTrace:
    """Complex field samples on a uniform time grid."""

    dt: float
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if len(self.amplitudes) < 2:
            raise ValueError("need at least two samples")

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def to_csv(self, path):
        a = self.amplitudes
        with open(path, "w") as fh:
            fh.write("t_ns,re,im,intensity\n")
            for i in range(len(a)):
                t = i * self.dt
                fh.write(
                    f"{float(t)!r},{float(a[i].real)!r},{float(a[i].imag)!r},{float(abs(a[i])**2)!r}\n"
                )


@dataclass
class CorrelationCurve:
    """Correlation values against time lag [ns]."""

    lags: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.lags) <= 0):
            raise ValueError("lags must be strictly ascending")
        if np.any(np.asarray(self.values) < 0):
            raise ValueError("correlation values must be >= 0")

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("lag_ns,value\n")
            for lag, v in zip(self.lags, self.values):
                fh.write(f"{float(lag)!r},{float(v)!r}\n")


def synthesize_field(tau_corr: float, dt: float, n: int, rng: np.random.Generator) -> FieldTrace:
    """Generate a chaotic field with |g1(tau)|^2 = exp(-pi (tau/tau_corr)^2).

    White complex Gaussian noise is shaped in the frequency domain by
    the square root of the Gaussian power spectral density that is the
    Fourier pair of the target g1; the mean intensity is one by
    construction.  The synthesis is periodic, so the first 5 tau_corr
    of samples are discarded to remove wrap-around correlation.
    """
    if dt > tau_corr / 20.0:
        raise NumericalGuardError(f"dt={dt} must be <= tau_corr/20 ({tau_corr/20.0})")
    if n * dt < 50.0 * tau_corr:
        raise NumericalGuardError("trace must span at least 50 correlation times")
    discard = int(math.ceil(5.0 * tau_corr / dt))
    total = n + discard
    freqs = np.fft.fftfreq(total, d=dt)
    # PSD of g1(tau) = exp(-pi tau^2 / (2 tau_corr^2)):
    #   S(nu) = tau_corr sqrt(2) exp(-2 pi nu^2 tau_corr^2)
    psd = tau_corr * math.sqrt(2.0) * np.exp(-2.0 * math.pi * (freqs * tau_corr) ** 2)
    white = (rng.standard_normal(total) + 1j * rng.standard_normal(total)) / math.sqrt(2.0)
    shaped = np.fft.ifft(white * np.sqrt(psd * total / dt))
    return FieldTrace(dt, shaped[discard:])


def _autocorr_lags_numpy(z: np.ndarray, n_lags: int) -> np.ndarray:
    n = len(z)
    out = np.empty(n_lags, dtype=complex)
    zc = np.conj(z)
    for m in range(n_lags):
        out[m] = np.dot(zc[: n - m], z[m:]) / n
    return out


def _autocorr_lags_loop(re, im, n_lags, out_re, out_im):
    n = re.shape[0]
    for m in prange(n_lags):
        acc_r = 0.0
        acc_i = 0.0
        for j in range(n - m):
            # conj(z_j) * z_{j+m}
            acc_r += re[j] * re[j + m] + im[j] * im[j + m]
            acc_i += re[j] * im[j + m] - im[j] * re[j + m]
        out_re[m] = acc_r / n
        out_im[m] = acc_i / n


_autocorr_lags_numba = njit(parallel=True)(_autocorr_lags_loop)


def _intensity_corr_numpy(ii: np.ndarray, n_lags: int) -> np.ndarray:
    n = len(ii)
    out = np.empty(n_lags)
    for m in range(n_lags):
        out[m] = np.dot(ii[: n - m], ii[m:]) / (n - m)
    return out


def _intensity_corr_loop(ii, n_lags, out):
    n = ii.shape[0]
    for m in prange(n_lags):
        acc = 0.0
        for j in range(n - m):
            acc += ii[j] * ii[j + m]
        out[m] = acc / (n - m)


_intensity_corr_numba = njit(parallel=True)(_intensity_corr_loop)


def _lag_count(trace: FieldTrace, max_lag: float) -> int:
    n_lags = int(math.floor(max_lag / trace.dt)) + 1
    if n_lags > len(trace.amplitudes) // 10:
        raise NumericalGuardError("max_lag must not exceed a tenth of the trace length")
    return n_lags


# The lag correlators dispatch to the dot-product (BLAS) route on both
# acceleration paths: it beats the compiled loop for this memory-bound
# pattern (see benchmarks/bench_kernels.py).  The njit variants stay
# importable for comparison.


def estimate_g1(trace: FieldTrace, max_lag: float) -> CorrelationCurve:
    """|g1| by the biased autocorrelation estimator; |g1(0)| = 1 exactly."""
    n_lags = _lag_count(trace, max_lag)
    corr = _autocorr_lags_numpy(trace.amplitudes, n_lags)
    g1 = np.abs(corr) / np.abs(corr[0])
    g1[0] = 1.0
    return CorrelationCurve(np.arange(n_lags) * trace.dt, g1)


def estimate_g2(trace: FieldTrace, max_lag: float) -> CorrelationCurve:
    """Classical intensity correlation <I(0) I(tau)> / <I>^2."""
    n_lags = _lag_count(trace, max_lag)
    ii = np.ascontiguousarray(trace.intensity)
    out = _intensity_corr_numpy(ii, n_lags)
    g2 = out / np.mean(ii) ** 2
    return CorrelationCurve(np.arange(n_lags) * trace.dt, g2)


@dataclass(frozen=True)
class GaussianG2Fit:
    amplitude: float
    tau_corr: float
    amplitude_err: float
    tau_corr_err: float
    identifiable: bool


def fit_gaussian_g2(curve: CorrelationCurve) -> GaussianG2Fit:
    """Least-squares fit of 1 + A exp(-pi (tau/tau_corr)^2).

    A flat curve (A indistinguishable from zero) is reported with
    identifiable=False since tau_corr then carries no information.
    """

    def model(tau, a, tc):
        return 1.0 + a * np.exp(-math.pi * (tau / tc) ** 2)

    lags = np.asarray(curve.lags, dtype=float)
    vals = np.asarray(curve.values, dtype=float)
    a0 = max(vals[0] - 1.0, 1e-6)
    below = np.where(vals - 1.0 < 0.5 * a0)[0]
    if len(below) and below[0] > 0:
        i = below[0]
        # interpolate the half-decay crossing, then invert the model;
        # a curve must cover three correlation-time guesses to pin tau
        frac = (vals[i - 1] - 1.0 - 0.5 * a0) / max(vals[i - 1] - vals[i], 1e-300)
        tau_half = lags[i - 1] + frac * (lags[i] - lags[i - 1])
        tc0 = max(tau_half / math.sqrt(math.log(2.0) / math.pi), lags[1])
        if lags[-1] < 2.85 * tc0:
            raise NumericalGuardError("curve must span at least three correlation-time guesses")
    else:
        # already flat at the first lag: degenerate, fit still reports
        tc0 = lags[-1] / 4.0
    try:
        popt, pcov = curve_fit(model, lags, vals, p0=(a0, tc0), maxfev=20000)
    except RuntimeError as err:
        resid = np.abs(vals - 1.0).max()
        raise FitError(f"correlation fit did not converge (max residual from flat: {resid:.3g})") from err
    perr = np.sqrt(np.abs(np.diag(pcov)))
    amp, tc = float(popt[0]), float(abs(popt[1]))
    amp_err, tc_err = float(perr[0]), float(perr[1])
    identifiable = amp > 5.0 * max(amp_err, 1e-12) and amp > 1e-3
    return GaussianG2Fit(amp, tc, amp_err, tc_err, identifiable)
