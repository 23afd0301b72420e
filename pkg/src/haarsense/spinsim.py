"""Two-level spin sensor: pulse-sequence filters, phase, contrast and readout.

Units: time in microseconds, field in microtesla, gamma in rad s^-1 T^-1.
The phase of a sequence is ``gamma * integral(b(t) * filter(t) dt)``; the
product of a microtesla and a microsecond is 1e-12 T s.

Random streams. Every Monte Carlo draw takes a ``seed`` that may be an int,
a :class:`numpy.random.SeedSequence` or a ready :class:`numpy.random.Generator`.
Protocols derive one independent stream per measurement with
:func:`substream`, keyed by the measurement's position, so results do not
depend on execution order or thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .errors import (BoundsError, CalibrationError, DegenerateReferenceError,
                     PhaseWrapError, ResolutionError)
from .signals import SampledSignal, Sinusoid, generate
from .wavelet import walsh_sign_changes

GAMMA_E = 1.7608596e11
UT_US = 1e-12
# reference counts must separate by this many standard deviations
MIN_REFERENCE_SNR = 3.0


@dataclass(frozen=True)
class SensorParams:
    gamma: float = GAMMA_E
    t2: float = 300.0
    t2_star: float = 3.0
    contrast_amplitude: float = 1.0
    photons_bright: float = 0.03
    photons_dark: float = 0.02
    decoherence_exponent: float = 3.0
    ramsey_exponent: float = 2.0
    pi_pulse_fidelity: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.t2 > self.t2_star > 0:
            raise ValueError("need t2 > t2_star > 0")
        if not 0 < self.contrast_amplitude <= 1:
            raise ValueError("contrast amplitude must lie in (0, 1]")
        if not self.photons_bright > self.photons_dark >= 0:
            raise ValueError("need photons_bright > photons_dark >= 0")
        if self.decoherence_exponent < 1 or self.ramsey_exponent < 1:
            raise ValueError("decoherence exponents must be >= 1")
        if not 0 < self.pi_pulse_fidelity <= 1:
            raise ValueError("pi pulse fidelity must lie in (0, 1]")

    @property
    def gamma_ut_us(self) -> float:
        """Phase in radians per microtesla-microsecond."""
        return self.gamma * UT_US


# --- pulse sequences ------------------------------------------------------------
# A sequence is a list of signed segments (a, b, sign) in signal time; the
# pi pulses sit at the internal sign flips and are instantaneous.

@dataclass(frozen=True)
class EchoSequence:
    """pi/2 - tau/2 - pi - tau/2 - pi/2 starting at ``start``."""

    start: float
    tau: float

    def __post_init__(self):
        if self.start < 0:
            raise ValueError("echo start must be >= 0")
        if not self.tau > 0:
            raise ValueError("echo tau must be > 0")

    @property
    def duration(self) -> float:
        return self.tau

    @property
    def stop(self) -> float:
        return self.start + self.tau

    @property
    def pi_pulses(self) -> int:
        return 1

    def segments(self):
        mid = self.start + self.tau / 2
        return [(self.start, mid, 1.0), (mid, self.stop, -1.0)]


@dataclass(frozen=True)
class FreePrecession:
    """Ramsey interval: no refocusing, filter +1 throughout."""

    start: float
    tau: float

    def __post_init__(self):
        if self.start < 0 or not self.tau > 0:
            raise ValueError("need start >= 0 and tau > 0")

    @property
    def duration(self) -> float:
        return self.tau

    @property
    def stop(self) -> float:
        return self.start + self.tau

    @property
    def pi_pulses(self) -> int:
        return 0

    def segments(self):
        return [(self.start, self.stop, 1.0)]


@dataclass(frozen=True)
class WalshSequence:
    """Multi-pulse sequence whose filter is ``w_index`` stretched over ``tau``."""

    index: int
    start: float
    tau: float

    def __post_init__(self):
        if self.index < 0 or self.start < 0 or not self.tau > 0:
            raise ValueError("need index >= 0, start >= 0 and tau > 0")

    @property
    def duration(self) -> float:
        return self.tau

    @property
    def stop(self) -> float:
        return self.start + self.tau

    @property
    def pi_pulses(self) -> int:
        return self.index

    def segments(self):
        edges = [0.0, *walsh_sign_changes(self.index), 1.0]
        out, sign = [], 1.0
        for a, b in zip(edges[:-1], edges[1:]):
            out.append((self.start + a * self.tau, self.start + b * self.tau, sign))
            sign = -sign
        return out


def filter_function(seq, t):
    """Sign the sequence applies to the field at time ``t``: +1, -1 or 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    for a, b, s in seq.segments():
        out = np.where((t >= a) & (t < b), s, out)
    return float(out) if out.ndim == 0 else out


def _snap(u: float) -> float:
    r = round(u)
    return float(r) if abs(u - r) <= 1e-9 * max(1.0, abs(u)) else u


def _segment_integral(signal: SampledSignal, a: float, b: float) -> float:
    # exact integral of the zero-order-hold signal over [a, b)
    dt = signal.dt
    f = signal.samples
    ua, ub = _snap(a / dt), _snap(b / dt)
    k0 = int(math.floor(ua))
    k1 = min(int(math.ceil(ub)), f.size)
    w = np.ones(k1 - k0)
    w[0] -= ua - k0
    w[-1] -= k1 - ub
    return float(np.dot(f[k0:k1], w)) * dt


def accumulate_phase(signal: SampledSignal, seq, gamma: float) -> float:
    """Phase ``gamma * integral(b * filter dt)`` picked up during ``seq``.

    The signal is treated as constant over each sample bin; when sequence
    edges fall on bin edges this is the midpoint rule. Each constant-sign
    segment must span at least two samples.
    """
    T = signal.duration
    tol = 1e-9 * T
    if seq.start < -tol or seq.stop > T + tol:
        raise BoundsError(
            f"sequence [{seq.start}, {seq.stop}) outside signal [0, {T})")
    total = 0.0
    for a, b, s in seq.segments():
        if b - a < 2 * signal.dt * (1 - 1e-9):
            raise ResolutionError(
                f"segment of {b - a} us spans fewer than 2 samples (dt={signal.dt})")
        total += s * _segment_integral(signal, max(a, 0.0), min(b, T))
    return gamma * UT_US * total


# --- contrast & readout ---------------------------------------------------------

def decay(tau: float, params: SensorParams, pi_pulses: int = 1) -> float:
    """Coherence envelope; free precession decays with T2*, echoes with T2."""
    if pi_pulses == 0:
        return math.exp(-(tau / params.t2_star) ** params.ramsey_exponent)
    return (math.exp(-(tau / params.t2) ** params.decoherence_exponent)
            * params.pi_pulse_fidelity ** pi_pulses)


def contrast_of_phase(phi, tau: float, params: SensorParams, pi_pulses: int = 1):
    """Signed readout contrast ``C0 sin(phi) D(tau)``.

    The closing pi/2 pulse is applied about an axis 90 degrees from the opening
    one, so the contrast is odd in the phase.
    """
    if not tau > 0:
        raise ValueError("tau must be > 0")
    return params.contrast_amplitude * np.sin(phi) * decay(tau, params, pi_pulses)


@dataclass(frozen=True)
class MeasurementOutcome:
    """Photon counts aggregated over ``repetitions`` shots.

    Counts are integers for simulated outcomes; :func:`expected_outcome`
    fills them with exact (float) means.
    """

    repetitions: int
    signal_counts: float
    reference_bright_counts: float
    reference_dark_counts: float

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if min(self.signal_counts, self.reference_bright_counts,
               self.reference_dark_counts) < 0:
            raise ValueError("counts must be >= 0")


def substream(seed, *key: int) -> np.random.Generator:
    """Independent generator for measurement ``key`` under root ``seed``.

    ``SeedSequence(seed, spawn_key=key)`` hashes the root entropy together
    with the key, so each measurement owns a reproducible stream.
    """
    if isinstance(seed, np.random.SeedSequence):
        root = seed.entropy
        key = tuple(seed.spawn_key) + tuple(key)
    else:
        root = seed
    return np.random.default_rng(np.random.SeedSequence(root, spawn_key=tuple(key)))


def _bright_probability(phi, tau, params, pi_pulses):
    return 0.5 * (1.0 + contrast_of_phase(phi, tau, params, pi_pulses))


def simulate_readout(phi: float, tau: float, params: SensorParams, M: int, seed,
                     pi_pulses: int = 1) -> MeasurementOutcome:
    """Poisson photon counts for ``M`` repetitions plus bright/dark references."""
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed)
    p0 = _bright_probability(phi, tau, params, pi_pulses)
    lam_b, lam_d = params.photons_bright, params.photons_dark
    lam = lam_d + (lam_b - lam_d) * p0
    # sum of M Poisson(lam) shots is Poisson(M lam)
    s = int(rng.poisson(M * lam))
    b = int(rng.poisson(M * lam_b))
    d = int(rng.poisson(M * lam_d))
    return MeasurementOutcome(M, s, b, d)


def expected_outcome(phi: float, tau: float, params: SensorParams, M: int,
                     pi_pulses: int = 1) -> MeasurementOutcome:
    p0 = _bright_probability(phi, tau, params, pi_pulses)
    lam_b, lam_d = params.photons_bright, params.photons_dark
    return MeasurementOutcome(M, M * (lam_d + (lam_b - lam_d) * p0), M * lam_b, M * lam_d)


def estimate_contrast(outcome: MeasurementOutcome) -> tuple[float, float]:
    """Contrast ``2 p0 - 1`` from the counts, with first-order Poisson error."""
    S = outcome.signal_counts
    B = outcome.reference_bright_counts
    D = outcome.reference_dark_counts
    span = B - D
    if span <= 0 or span < MIN_REFERENCE_SNR * math.sqrt(B + D):
        raise DegenerateReferenceError(
            f"bright ({B}) and dark ({D}) references are not resolved")
    r = (S - D) / span
    var_r = (S + r * r * B + (1 - r) ** 2 * D) / span ** 2
    return 2 * r - 1, 2 * math.sqrt(var_r)


def estimate_phase(outcome: MeasurementOutcome, tau: float, params: SensorParams,
                   pi_pulses: int = 1, wrap_tol: float = 1e-9) -> tuple[float, float]:
    """Invert the contrast to ``(phi_hat, sigma_phi)``.

    Refuses (``PhaseWrapError``) when the normalized contrast leaves
    ``[-1, 1]`` by more than ``wrap_tol``: picking a branch silently would
    corrupt the reconstruction.
    """
    c, sc = estimate_contrast(outcome)
    scale = params.contrast_amplitude * decay(tau, params, pi_pulses)
    u = c / scale
    if abs(u) > 1 + wrap_tol:
        raise PhaseWrapError(f"normalized contrast {u:.4g} outside [-1, 1]")
    u = min(1.0, max(-1.0, u))
    root = math.sqrt(1 - u * u)
    sigma = sc / (scale * root) if root > 0 else math.inf
    return math.asin(u), sigma


def ideal_phase(phi: float) -> tuple[float, float]:
    """Infinite-repetition limit: exact phase, subject to the same branch limit."""
    if abs(phi) > math.pi / 2:
        raise PhaseWrapError(f"phase {phi:.4g} rad outside [-pi/2, pi/2]")
    return phi, 0.0


# --- calibration ----------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationCurve:
    amplitudes: np.ndarray
    contrasts: np.ndarray
    scale: float
    frequency: float
    offset: float
    residual: float

    @property
    def period(self) -> float:
        """Amplitude period of the fitted sinusoid, microtesla."""
        return 2 * math.pi / abs(self.frequency)

    @property
    def slope_at_origin(self) -> float:
        return self.scale * self.frequency

    def __call__(self, amplitude):
        return self.scale * np.sin(self.frequency * np.asarray(amplitude)) + self.offset


def _calibration_model(a, scale, freq, offset):
    return scale * np.sin(freq * a) + offset


def calibrate(params: SensorParams, tau: float, amplitude_grid, M: int | None,
              seed=0, sample_count: int = 1024) -> CalibrationCurve:
    """Contrast versus amplitude of an in-phase sinusoid echo, fitted by a sinusoid.

    ``M=None`` uses exact contrasts. The fit starts from the ideal response
    ``C0 D(tau) sin(2 gamma tau A / pi)``.
    """
    amps = np.asarray(amplitude_grid, dtype=float)
    if amps.size < 5:
        raise ValueError("calibration needs at least 5 amplitudes")
    seq = EchoSequence(0.0, tau)
    contrasts = np.empty_like(amps)
    for k, a in enumerate(amps):
        sig = generate(Sinusoid(abs(a), tau, 0.0 if a >= 0 else math.pi), tau, sample_count)
        phi = accumulate_phase(sig, seq, params.gamma)
        if M is None:
            contrasts[k] = contrast_of_phase(phi, tau, params)
        else:
            outcome = simulate_readout(phi, tau, params, M, substream(seed, k))
            contrasts[k] = estimate_contrast(outcome)[0]
    guess = (params.contrast_amplitude * decay(tau, params),
             2 * params.gamma_ut_us * tau / math.pi, 0.0)
    try:
        popt, _ = curve_fit(_calibration_model, amps, contrasts, p0=guess, maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        resid = contrasts - _calibration_model(amps, *guess)
        raise CalibrationError(f"calibration fit failed: {exc}", resid) from None
    resid = contrasts - _calibration_model(amps, *popt)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return CalibrationCurve(amps, contrasts, float(popt[0]), float(popt[1]),
                            float(popt[2]), rms)
