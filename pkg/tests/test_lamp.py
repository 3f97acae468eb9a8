import math

import numpy as np
import pytest
from scipy.optimize import curve_fit
from scipy.stats import kstest

from tlsrf import core, lamp
from tlsrf.core import NumericalGuardError

TAU = 901.8


@pytest.fixture(scope="module")
def field():
    return lamp.synthesize_field(TAU, TAU / 20.0, 1 << 20, core.stream(7))


@pytest.fixture(scope="module")
def g1_curve(field):
    return lamp.estimate_g1(field, 3.2 * TAU)


@pytest.fixture(scope="module")
def g2_curve(field):
    return lamp.estimate_g2(field, 3.2 * TAU)


class TestSynthesizeField:
    def test_intensity_is_exponential(self, field):
        stat = kstest(field.intensity, "expon", args=(0.0, field.intensity.mean())).statistic
        assert stat < 0.01

    def test_mean_intensity_near_one(self, field):
        assert field.intensity.mean() == pytest.approx(1.0, abs=0.02)

    def test_zero_lag_bunching(self, g2_curve):
        assert g2_curve.values[0] == pytest.approx(2.0, abs=0.05)

    def test_fit_recovers_correlation_time(self, g2_curve):
        fit = lamp.fit_gaussian_g2(g2_curve)
        assert fit.identifiable
        assert fit.tau_corr == pytest.approx(TAU, rel=0.05)
        assert fit.amplitude == pytest.approx(1.0, abs=0.1)

    def test_resolution_guard(self):
        with pytest.raises(NumericalGuardError):
            lamp.synthesize_field(TAU, TAU / 5.0, 1 << 16, core.stream(1))

    def test_length_guard(self):
        with pytest.raises(NumericalGuardError):
            lamp.synthesize_field(TAU, TAU / 20.0, 256, core.stream(1))

    def test_spectral_width_is_fourier_pair(self, field):
        # Welch-style averaged periodogram, Gaussian fit; the spectrum
        # paired with the Gaussian coherence decay has an ordinary-
        # frequency FWHM of 0.664 / tau_corr
        x = field.amplitudes
        nseg = 64
        seg = len(x) // nseg
        psd = np.zeros(seg)
        for k in range(nseg):
            psd += np.abs(np.fft.fft(x[k * seg : (k + 1) * seg])) ** 2
        f = np.fft.fftfreq(seg, field.dt)
        order = np.argsort(f)
        f, psd = f[order], psd[order]
        win = np.abs(f) < 20.0 / TAU

        def model(nu, a, sig):
            return a * np.exp(-0.5 * (nu / sig) ** 2)

        popt, _ = curve_fit(model, f[win], psd[win], p0=(psd.max(), 0.3 / TAU))
        fwhm = 2.0 * math.sqrt(2.0 * math.log(2.0)) * abs(popt[1])
        assert fwhm == pytest.approx(0.664 / TAU, rel=0.10)


class TestEstimateG1:
    def test_zero_lag_normalization(self, g1_curve):
        assert g1_curve.values[0] == 1.0

    def test_white_noise_decorrelates(self):
        rng = core.stream(11)
        amps = (rng.standard_normal(40_000) + 1j * rng.standard_normal(40_000)) / math.sqrt(2.0)
        trace = lamp.FieldTrace(1.0, amps)
        g1 = lamp.estimate_g1(trace, 10.0)
        assert g1.values[1] < 0.1

    def test_gaussian_decay_at_tau_corr(self, g1_curve):
        i = int(round(TAU / (TAU / 20.0)))
        assert g1_curve.values[i] == pytest.approx(math.exp(-math.pi / 2.0), abs=0.02)

    def test_lag_guard(self, field):
        with pytest.raises(NumericalGuardError):
            lamp.estimate_g1(field, field.dt * len(field.amplitudes) / 2.0)


class TestEstimateG2:
    def test_constant_intensity(self):
        trace = lamp.FieldTrace(1.0, np.ones(5000, dtype=complex))
        g2 = lamp.estimate_g2(trace, 100.0)
        assert np.allclose(g2.values, 1.0, atol=1e-12)

    def test_siegert_relation(self, g1_curve, g2_curve):
        resid = np.abs(g2_curve.values - 1.0 - g1_curve.values**2)
        assert resid.max() < 0.05

    def test_long_lag_decorrelation(self, field):
        g2 = lamp.estimate_g2(field, 5.5 * TAU)
        far = g2.values[g2.lags > 5.0 * TAU]
        assert np.all(np.abs(far - 1.0) < 0.05)


class TestFitGaussianG2:
    def test_exact_model_recovery(self):
        lags = np.linspace(0.0, 4.0 * TAU, 400)
        vals = 1.0 + 1.0 * np.exp(-math.pi * (lags / TAU) ** 2)
        fit = lamp.fit_gaussian_g2(lamp.CorrelationCurve(lags, vals))
        assert fit.amplitude == pytest.approx(1.0, abs=1e-6)
        assert fit.tau_corr == pytest.approx(TAU, rel=1e-6)

    def test_flat_curve_unidentifiable(self):
        lags = np.linspace(0.0, 1000.0, 300)
        fit = lamp.fit_gaussian_g2(lamp.CorrelationCurve(lags, np.ones_like(lags)))
        assert abs(fit.amplitude) < 1e-3 or not fit.identifiable
        assert not fit.identifiable

    def test_stderr_scaling_with_length(self):
        # sqrt-N convergence: doubling the trace length contracts the
        # spread of the zero-lag estimate by about sqrt(2)
        def spread(n, seeds):
            vals = []
            for s in seeds:
                tr = lamp.synthesize_field(TAU, TAU / 20.0, n, core.stream(s))
                vals.append(lamp.estimate_g2(tr, 5 * TAU).values[0])
            return np.std(vals, ddof=1)

        seeds = range(100, 116)
        ratio = spread(1 << 16, seeds) / spread(1 << 17, [s + 50 for s in seeds])
        assert math.sqrt(2.0) * 0.65 < ratio < math.sqrt(2.0) * 1.45


def test_field_csv_roundtrip(tmp_path):
    trace = lamp.synthesize_field(TAU, TAU / 20.0, 1 << 16, core.stream(2))
    path = tmp_path / "field.csv"
    trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t_ns,re,im,intensity"
    assert len(lines) == len(trace.amplitudes) + 1


def test_correlation_csv(tmp_path, g2_curve):
    path = tmp_path / "g2.csv"
    g2_curve.to_csv(path)
    assert path.read_text().splitlines()[0] == "lag_ns,value"
