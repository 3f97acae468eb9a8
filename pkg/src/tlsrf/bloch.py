"""Optical Bloch equations for a driven two-level emitter.

State variables are the excited-state population rho11 and the
coherence rho01 = u + i v.  On resonance the rotating-frame equations
reduce to

    d(rho11)/dt = omega * v - rho11/t1
    du/dt       = det * v - u/t2
    dv/dt       = -det * u - v/t2 - (omega/2) * (2*rho11 - 1)

whose fixed point reproduces the standard saturation law.  Chaotic
drive enters through averages over an exponential distribution of the
squared Rabi frequency.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _scipy_integrate

from . import _accel
from ._accel import njit
from .core import DrivePulse, NumericalGuardError, QuadratureError, TlsParams
from .photonstat import sample_chaotic_intensity

_EULER_GAMMA = 0.5772156649015328606

# Default correlation time [ns] of the chaotic source; drives the
# quasi-static validity warning in chaotic_transient.
LAMP_TAU_CORR = 901.8


@dataclass(frozen=True)
class BlochState:
    """Population and coherence of the emitter density matrix."""

    rho11: float
    rho01_re: float = 0.0
    rho01_im: float = 0.0

    _ATOL = 1e-9

    def __post_init__(self):
        if not (-self._ATOL <= self.rho11 <= 1.0 + self._ATOL):
            raise ValueError(f"rho11={self.rho11} outside [0, 1]")
        coh2 = self.rho01_re**2 + self.rho01_im**2
        if coh2 > self.rho11 * (1.0 - self.rho11) + self._ATOL:
            raise ValueError("coherence violates density-matrix positivity")

    @classmethod
    def ground(cls) -> "BlochState":
        return cls(0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.rho11, self.rho01_re, self.rho01_im])


@dataclass
class BlochTrace:
    """Uniformly sampled Bloch-state time series.

    stderr, when present, is the standard error of the mean rho11 of an
    ensemble average.
    """

    t0: float
    dt: float
    rho11: np.ndarray
    rho01_re: np.ndarray
    rho01_im: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if len(self.rho11) == 0:
            raise ValueError("trace must contain samples")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.rho11))

    def state(self, i: int) -> BlochState:
        return BlochState(float(self.rho11[i]), float(self.rho01_re[i]), float(self.rho01_im[i]))

    def to_csv(self, path):
        cols = [self.rho11, self.rho01_re, self.rho01_im]
        header = "t_ns,rho11,rho01_re,rho01_im"
        if self.stderr is not None:
            cols.append(self.stderr)
            header += ",stderr"
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for i, t in enumerate(self.times):
                fh.write(",".join(repr(float(v)) for v in (t, *[c[i] for c in cols])) + "\n")


def bloch_derivative(state: BlochState, params: TlsParams, omega_t: float, detuning: float = 0.0) -> np.ndarray:
    """Time derivative (d rho11, d u, d v) at the given drive value."""
    r, u, v = state.rho11, state.rho01_re, state.rho01_im
    return np.array(
        [
            omega_t * v - r / params.t1,
            detuning * v - u / params.t2,
            -detuning * u - v / params.t2 - 0.5 * omega_t * (2.0 * r - 1.0),
        ]
    )


def steady_state_population(params: TlsParams, omega: float, detuning: float = 0.0) -> float:
    """Fixed-point excited population under constant coherent drive.

    Equals S / (2 (1 + S)) on resonance with S = omega**2 t1 t2.
    """
    if omega < 0:
        raise ValueError("omega must be >= 0")
    if omega == 0.0:
        return 0.0
    d = detuning**2 + 1.0 / params.t2**2
    x = omega**2 * params.t1 / params.t2
    return 0.5 * x / (d + x)


def steady_state_from_saturation(s: float) -> float:
    """Resonant steady-state population as a function of S alone."""
    if s < 0:
        raise ValueError("s must be >= 0")
    return 0.5 * s / (1.0 + s)


def steady_state(params: TlsParams, omega: float, detuning: float = 0.0) -> BlochState:
    """Full steady state including the coherence."""
    r11 = steady_state_population(params, omega, detuning)
    if omega == 0.0:
        return BlochState(0.0, 0.0, 0.0)
    z = complex(1.0 / params.t2, detuning)
    r01 = -1j * 0.5 * omega * (2.0 * r11 - 1.0) / z
    return BlochState(r11, r01.real, r01.imag)


def _exp1_cf_scaled(x: float) -> float:
    """Modified-Lentz continued fraction for e^x E1(x), x > 1."""
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    f = d
    for k in range(1, 200):
        a = -k * k
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        if c == 0.0:
            c = tiny
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return f


def exp1(x: float) -> float:
    """Exponential integral E1(x) for x > 0.

    Power series below x = 1, modified-Lentz continued fraction above;
    relative error is at the 1e-14 level across the domain.
    """
    if x <= 0:
        raise ValueError("exp1 requires x > 0")
    if x <= 1.0:
        total = -_EULER_GAMMA - math.log(x)
        term = 1.0
        for k in range(1, 64):
            term *= -x / k
            contrib = -term / k
            total += contrib
            if abs(contrib) < 1e-17 * max(abs(total), 1e-300):
                break
        return total
    return _exp1_cf_scaled(x) * math.exp(-x)


def exp1_scaled(x: float) -> float:
    """e^x E1(x), stable for arbitrarily large x (tends to 1/x)."""
    if x <= 0:
        raise ValueError("exp1_scaled requires x > 0")
    if x <= 1.0:
        return math.exp(x) * exp1(x)
    return _exp1_cf_scaled(x)


def _mean_inverse_saturation(params: TlsParams, mean_omega: float, detuning: float) -> float:
    d = detuning**2 + 1.0 / params.t2**2
    c = d * params.t2 / params.t1  # rho_ss = X / (2 (X + c)) with X = omega^2
    return c / mean_omega**2


def chaotic_steady_state(params: TlsParams, mean_omega: float, detuning: float = 0.0) -> float:
    """Steady population averaged over exponential intensity fluctuations.

    Closed form 0.5 * (1 - a * e^a * E1(a)) with a = 1/S_bar on
    resonance; off resonance a generalizes to (det^2 + 1/t2^2) t2 /
    (t1 * mean_omega^2).  Always below the coherent-drive value.
    """
    if mean_omega < 0:
        raise ValueError("mean_omega must be >= 0")
    if mean_omega == 0.0:
        return 0.0
    a = _mean_inverse_saturation(params, mean_omega, detuning)
    return 0.5 * (1.0 - a * exp1_scaled(a))


def chaotic_steady_state_quadrature(
    params: TlsParams, mean_omega: float, detuning: float = 0.0, rtol: float = 1e-9
) -> float:
    """Reference evaluation of the chaotic average by adaptive quadrature.

    Integrates the saturation curve against the exponential intensity
    weight over squared Rabi frequency up to 50x the mean, doubling the
    cutoff until the result is stable to rtol.
    """
    if mean_omega < 0:
        raise ValueError("mean_omega must be >= 0")
    if mean_omega == 0.0:
        return 0.0
    w2 = mean_omega**2
    d = detuning**2 + 1.0 / params.t2**2
    ratio = params.t1 / params.t2

    def f(x):
        return 0.5 * x * ratio / (d + x * ratio) * math.exp(-x / w2) / w2

    cutoff = 50.0 * w2
    prev = None
    for _ in range(12):
        val, _err = _scipy_integrate.quad(f, 0.0, cutoff, limit=500, epsabs=1e-15, epsrel=1e-13)
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
            return val
        prev = val
        cutoff *= 2.0
    raise QuadratureError("chaotic steady-state quadrature did not converge under cutoff doubling")


# ---------------------------------------------------------------------------
# RK4 integration kernels.  The drive is piecewise constant per step
# (envelope edges snap to the step grid), which keeps fixed-step RK4
# exact in its schedule handling.


def _rk4_trace_loop(n_steps, dt, om_steps, det, t1, t2, r0, u0, v0, out):
    r, u, v = r0, u0, v0
    out[0, 0] = r
    out[0, 1] = u
    out[0, 2] = v
    it1 = 1.0 / t1
    it2 = 1.0 / t2
    for j in range(n_steps):
        om = om_steps[j]
        kr1 = om * v - r * it1
        ku1 = det * v - u * it2
        kv1 = -det * u - v * it2 - 0.5 * om * (2.0 * r - 1.0)
        r2 = r + 0.5 * dt * kr1
        u2 = u + 0.5 * dt * ku1
        v2 = v + 0.5 * dt * kv1
        kr2 = om * v2 - r2 * it1
        ku2 = det * v2 - u2 * it2
        kv2 = -det * u2 - v2 * it2 - 0.5 * om * (2.0 * r2 - 1.0)
        r3 = r + 0.5 * dt * kr2
        u3 = u + 0.5 * dt * ku2
        v3 = v + 0.5 * dt * kv2
        kr3 = om * v3 - r3 * it1
        ku3 = det * v3 - u3 * it2
        kv3 = -det * u3 - v3 * it2 - 0.5 * om * (2.0 * r3 - 1.0)
        r4 = r + dt * kr3
        u4 = u + dt * ku3
        v4 = v + dt * kv3
        kr4 = om * v4 - r4 * it1
        ku4 = det * v4 - u4 * it2
        kv4 = -det * u4 - v4 * it2 - 0.5 * om * (2.0 * r4 - 1.0)
        sixth = dt / 6.0
        r += sixth * (kr1 + 2.0 * kr2 + 2.0 * kr3 + kr4)
        u += sixth * (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4)
        v += sixth * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4)
        out[j + 1, 0] = r
        out[j + 1, 1] = u
        out[j + 1, 2] = v
    return out


_rk4_trace_numba = njit()(_rk4_trace_loop)


def _rk4_ensemble_loop(n_steps, dt, amp_steps, omegas, det, t1, t2, mean, meansq, coh_re, coh_im):
    """Serial per-sample RK4, accumulating ensemble sums in sample order."""
    n = omegas.shape[0]
    it1 = 1.0 / t1
    it2 = 1.0 / t2
    for i in range(n):
        base = omegas[i]
        r = 0.0
        u = 0.0
        v = 0.0
        mean[0] += r
        meansq[0] += r * r
        for j in range(n_steps):
            om = base * amp_steps[j]
            kr1 = om * v - r * it1
            ku1 = det * v - u * it2
            kv1 = -det * u - v * it2 - 0.5 * om * (2.0 * r - 1.0)
            r2 = r + 0.5 * dt * kr1
            u2 = u + 0.5 * dt * ku1
            v2 = v + 0.5 * dt * kv1
            kr2 = om * v2 - r2 * it1
            ku2 = det * v2 - u2 * it2
            kv2 = -det * u2 - v2 * it2 - 0.5 * om * (2.0 * r2 - 1.0)
            r3 = r + 0.5 * dt * kr2
            u3 = u + 0.5 * dt * ku2
            v3 = v + 0.5 * dt * kv2
            kr3 = om * v3 - r3 * it1
            ku3 = det * v3 - u3 * it2
            kv3 = -det * u3 - v3 * it2 - 0.5 * om * (2.0 * r3 - 1.0)
            r4 = r + dt * kr3
            u4 = u + dt * ku3
            v4 = v + dt * kv3
            kr4 = om * v4 - r4 * it1
            ku4 = det * v4 - u4 * it2
            kv4 = -det * u4 - v4 * it2 - 0.5 * om * (2.0 * r4 - 1.0)
            sixth = dt / 6.0
            r += sixth * (kr1 + 2.0 * kr2 + 2.0 * kr3 + kr4)
            u += sixth * (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4)
            v += sixth * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4)
            mean[j + 1] += r
            meansq[j + 1] += r * r
            coh_re[j + 1] += u
            coh_im[j + 1] += v


_rk4_ensemble_numba = njit()(_rk4_ensemble_loop)


def _rk4_ensemble_numpy(n_steps, dt, amp_steps, omegas, det, t1, t2, mean, meansq, coh_re, coh_im):
    """Lock-step vectorized RK4 over all ensemble members at once."""
    it1 = 1.0 / t1
    it2 = 1.0 / t2
    r = np.zeros_like(omegas)
    u = np.zeros_like(omegas)
    v = np.zeros_like(omegas)
    n = len(omegas)
    mean[0] += float(r.sum())
    meansq[0] += float((r * r).sum())

    def deriv(om, r, u, v):
        return (
            om * v - r * it1,
            det * v - u * it2,
            -det * u - v * it2 - 0.5 * om * (2.0 * r - 1.0),
        )

    for j in range(n_steps):
        om = omegas * amp_steps[j]
        kr1, ku1, kv1 = deriv(om, r, u, v)
        kr2, ku2, kv2 = deriv(om, r + 0.5 * dt * kr1, u + 0.5 * dt * ku1, v + 0.5 * dt * kv1)
        kr3, ku3, kv3 = deriv(om, r + 0.5 * dt * kr2, u + 0.5 * dt * ku2, v + 0.5 * dt * kv2)
        kr4, ku4, kv4 = deriv(om, r + dt * kr3, u + dt * ku3, v + dt * kv3)
        sixth = dt / 6.0
        r = r + sixth * (kr1 + 2.0 * kr2 + 2.0 * kr3 + kr4)
        u = u + sixth * (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4)
        v = v + sixth * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4)
        mean[j + 1] += float(r.sum())
        meansq[j + 1] += float((r * r).sum())
        coh_re[j + 1] += float(u.sum())
        coh_im[j + 1] += float(v.sum())


def _step_guard(params: TlsParams, omega_max: float, dt: float):
    limit = params.t2
    if omega_max > 0:
        limit = min(limit, 2.0 * math.pi / omega_max)
    limit /= 50.0
    if dt > limit * (1.0 + 1e-12):
        raise NumericalGuardError(
            f"dt={dt} too coarse for T2={params.t2} and max drive {omega_max}; use dt <= {limit:.3e}"
        )


def _amplitudes_per_step(pulse: DrivePulse, n_steps: int, dt: float, t0: float = 0.0) -> np.ndarray:
    # Evaluating at step midpoints snaps envelope edges to the grid.
    mid = t0 + dt * (np.arange(n_steps) + 0.5)
    amps = np.zeros(n_steps)
    for start, stop, amp in pulse.envelope:
        amps[(mid >= start) & (mid < stop)] = amp
    return amps


def integrate(
    params: TlsParams,
    pulse: DrivePulse,
    t_end: float,
    dt: float,
    initial: BlochState | None = None,
) -> BlochTrace:
    """Fixed-step RK4 trace of the Bloch equations from t = 0 to t_end.

    The envelope is piecewise constant per step.  Halving dt moves any
    sample by less than 1e-6 at the guard-allowed resolution (4th-order
    convergence); a step-size guard enforces dt <= min(t2, 2*pi/omega)/50.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    om_max = pulse.rabi * pulse.max_amplitude()
    _step_guard(params, om_max, dt)
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(t_end, 1.0):
        n_steps = int(math.ceil(t_end / dt))
    state0 = initial or BlochState.ground()
    amps = _amplitudes_per_step(pulse, n_steps, dt) * pulse.rabi
    out = np.empty((n_steps + 1, 3))
    kernel = _rk4_trace_numba if _accel.USE_NUMBA else _rk4_trace_loop
    kernel(n_steps, dt, amps, pulse.detuning, params.t1, params.t2,
           state0.rho11, state0.rho01_re, state0.rho01_im, out)
    return BlochTrace(0.0, dt, out[:, 0].copy(), out[:, 1].copy(), out[:, 2].copy())


def chaotic_transient(
    params: TlsParams,
    pulse: DrivePulse,
    t_end: float,
    dt: float,
    n_samples: int,
    rng: np.random.Generator,
    tau_corr: float = LAMP_TAU_CORR,
) -> BlochTrace:
    """Ensemble-averaged transient under quasi-static chaotic drive.

    Each member draws a squared Rabi frequency from the exponential
    intensity law and is integrated with the shared envelope; the
    returned trace is the pointwise mean with the standard error of
    rho11.  Valid while the pulse is much shorter than the source
    correlation time (warned above tau_corr/10).
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    spans = [(start, stop) for start, stop, amp in pulse.envelope if amp > 0]
    if spans:
        span = max(s for _, s in spans) - min(s for s, _ in spans)
        if span > tau_corr / 10.0:
            warnings.warn(
                f"pulse span {span} ns is not small against the source correlation "
                f"time {tau_corr} ns; the quasi-static approximation degrades",
                stacklevel=2,
            )
    om_max = pulse.rabi * pulse.max_amplitude()
    # drawn intensities can exceed the mean; guard with a factor that
    # covers all but the exponential tail (whose members stay stable,
    # merely less accurate, and are statistically negligible)
    _step_guard(params, 2.0 * om_max, dt)
    n_steps = int(math.ceil(t_end / dt))
    w2 = sample_chaotic_intensity(rng, pulse.rabi**2, size=n_samples)
    omegas = np.sqrt(np.asarray(w2, dtype=float))
    amps = _amplitudes_per_step(pulse, n_steps, dt)
    mean = np.zeros(n_steps + 1)
    meansq = np.zeros(n_steps + 1)
    coh_re = np.zeros(n_steps + 1)
    coh_im = np.zeros(n_steps + 1)
    kernel = _rk4_ensemble_numba if _accel.USE_NUMBA else _rk4_ensemble_numpy
    kernel(n_steps, dt, amps, omegas, pulse.detuning, params.t1, params.t2,
           mean, meansq, coh_re, coh_im)
    mean /= n_samples
    meansq /= n_samples
    coh_re /= n_samples
    coh_im /= n_samples
    var = np.maximum(meansq - mean**2, 0.0) * n_samples / (n_samples - 1)
    stderr = np.sqrt(var / n_samples)
    return BlochTrace(0.0, dt, mean, coh_re, coh_im, stderr=stderr)
