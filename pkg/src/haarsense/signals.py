"""Temporal magnetic fields: sampled signals, generators and CSV I/O.

Units throughout: time in microseconds, field in microtesla. Samples live at
bin midpoints, ``t_k = (k + 1/2) * T / N``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import SignalFormatError

CSV_HEADER = ("t_us", "b_uT")
# relative tolerance on grid spacing when reading files
SPACING_RTOL = 1e-9


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled field ``b(t)`` on ``[0, duration)``."""

    duration: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if not self.duration > 0 or not math.isfinite(self.duration):
            raise SignalFormatError(f"duration must be positive, got {self.duration}")
        if samples.ndim != 1 or samples.size < 2:
            raise SignalFormatError("need a 1-D array of at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise SignalFormatError("samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "duration", float(self.duration))
        object.__setattr__(self, "samples", samples)

    @property
    def sample_count(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return self.duration / self.samples.size

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.samples.size) + 0.5) * self.dt

    @cached_property
    def unit_times(self) -> np.ndarray:
        """Sample positions rescaled to ``x = t/T``."""
        x = (np.arange(self.samples.size) + 0.5) / self.samples.size
        x.setflags(write=False)
        return x

    def block_averages(self, n_bins: int) -> np.ndarray:
        """Mean of the samples inside each of ``n_bins`` equal bins."""
        if self.samples.size % n_bins:
            raise SignalFormatError(
                f"{self.samples.size} samples do not split into {n_bins} bins")
        return self.samples.reshape(n_bins, -1).mean(axis=1)


# --- signal descriptions -----------------------------------------------------

@dataclass(frozen=True)
class Sinusoid:
    """``A sin(2 pi t / period + phase)``."""

    amplitude: float
    period: float
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise SignalFormatError("sinusoid amplitude must be >= 0")
        if not self.period > 0:
            raise SignalFormatError("sinusoid period must be > 0")


@dataclass(frozen=True)
class Waveform:
    """Arbitrary waveform held piecewise constant over equal bins.

    Exactly one of ``values`` (inline) or ``path`` (a CSV in the ``t_us,b_uT``
    format) is given.
    """

    values: tuple[float, ...] | None = None
    path: str | None = None

    def __post_init__(self):
        if (self.values is None) == (self.path is None):
            raise SignalFormatError("waveform needs exactly one of values or path")
        if self.values is not None:
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            if len(self.values) < 1:
                raise SignalFormatError("waveform has no values")

    def resolve(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        return load_csv(self.path).samples


@dataclass(frozen=True)
class Impulse:
    """One nerve-impulse transient.

    ``center`` is the onset time, where the sharp positive lobe peaks.
    """

    center: float
    polarity: int = 1
    amplitude: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.polarity not in (1, -1):
            raise SignalFormatError("impulse polarity must be +1 or -1")
        if not self.width > 0:
            raise SignalFormatError("impulse width must be > 0")
        if self.amplitude < 0:
            raise SignalFormatError("impulse amplitude must be >= 0")


@dataclass(frozen=True)
class ImpulseTrain:
    events: tuple[Impulse, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))


SignalSpec = Union[Sinusoid, Waveform, ImpulseTrain]


def impulse_template(s, width: float) -> np.ndarray:
    """Biphasic template with unit positive peak, ``s`` = time since onset.

    Derivative of ``exp(-s/tau_f) - exp(-s/tau_r)`` for ``s >= 0`` with
    ``tau_r = width/5`` and ``tau_f = width``. The peak ``4/width`` sits at the
    onset and is scaled to 1.
    """
    s = np.asarray(s, dtype=float)
    tau_r, tau_f = width / 5.0, width
    out = np.zeros_like(s)
    on = s >= 0
    out[on] = np.exp(-s[on] / tau_r) / tau_r - np.exp(-s[on] / tau_f) / tau_f
    return out / (1.0 / tau_r - 1.0 / tau_f)


def generate(spec: SignalSpec, duration: float, sample_count: int) -> SampledSignal:
    """Render a signal description on the midpoint grid of ``[0, duration)``."""
    if sample_count < 2:
        raise SignalFormatError("sample_count must be >= 2")
    if not duration > 0:
        raise SignalFormatError("duration must be > 0")
    t = (np.arange(sample_count) + 0.5) * (duration / sample_count)

    if isinstance(spec, Sinusoid):
        b = spec.amplitude * np.sin(2 * np.pi * t / spec.period + spec.phase)
    elif isinstance(spec, Waveform):
        values = spec.resolve()
        # zero-order hold of the waveform bins
        idx = np.minimum((np.arange(sample_count) * values.size) // sample_count,
                         values.size - 1)
        b = values[idx]
    elif isinstance(spec, ImpulseTrain):
        b = np.zeros(sample_count)
        for ev in spec.events:
            if not 0 <= ev.center < duration:
                raise SignalFormatError(
                    f"impulse center {ev.center} outside [0, {duration})")
            b += ev.polarity * ev.amplitude * impulse_template(t - ev.center, ev.width)
    else:
        raise TypeError(f"unknown signal spec {type(spec).__name__}")
    return SampledSignal(duration, b)


def random_impulse_train(seed, count: int, duration: float, *, amplitude: float,
                         width: float, min_separation: float | None = None,
                         margin: float | None = None) -> ImpulseTrain:
    """Randomly placed impulses with random polarities.

    Centers are drawn uniformly in ``[margin, duration - margin)`` and redrawn
    until all pairwise gaps reach ``min_separation`` (default ``3 * width``).
    ``margin`` defaults to ``width`` at the start and ``2 * width`` at the end so
    that each negative lobe fits inside the window.
    """
    rng = np.random.default_rng(seed)
    sep = 3 * width if min_separation is None else min_separation
    lo = width if margin is None else margin
    hi = duration - (2 * width if margin is None else margin)
    if hi <= lo or (count - 1) * sep > hi - lo:
        raise SignalFormatError("impulses do not fit in the window")
    for _ in range(10_000):
        centers = np.sort(rng.uniform(lo, hi, size=count))
        if count < 2 or np.min(np.diff(centers)) >= sep:
            break
    else:
        raise SignalFormatError("could not place impulses with requested separation")
    polarities = rng.choice([-1, 1], size=count)
    return ImpulseTrain(tuple(
        Impulse(float(c), int(p), amplitude, width) for c, p in zip(centers, polarities)))


# --- CSV ------------------------------------------------------------------------

def save_csv(signal: SampledSignal, path) -> None:
    """Write ``t_us,b_uT`` rows with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for t, b in zip(signal.times, signal.samples):
            fh.write(f"{t:.17g},{b:.17g}\n")


def load_csv(path) -> SampledSignal:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(c.strip() for c in rows[0]) != CSV_HEADER:
        raise SignalFormatError(f"{path}: expected header {','.join(CSV_HEADER)}")
    body = [r for r in rows[1:] if r]
    for lineno, r in enumerate(body, start=2):
        if len(r) != 2:
            raise SignalFormatError(f"{path}:{lineno}: expected 2 columns, got {len(r)}")
    try:
        data = np.array([[float(a), float(b)] for a, b in body])
    except ValueError as exc:
        raise SignalFormatError(f"{path}: {exc}") from None
    if data.shape[0] < 2:
        raise SignalFormatError(f"{path}: need at least 2 samples")
    t, b = data[:, 0], data[:, 1]
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise SignalFormatError(f"{path}: time column not strictly increasing")
    dt = (t[-1] - t[0]) / (t.size - 1)
    if np.max(np.abs(steps - dt)) > SPACING_RTOL * dt:
        raise SignalFormatError(f"{path}: non-uniform time spacing")
    if abs(t[0] - dt / 2) > SPACING_RTOL * max(dt, abs(t[0])) * 10:
        raise SignalFormatError(f"{path}: first sample must sit at the bin midpoint dt/2")
    return SampledSignal(dt * t.size, b)


def as_signal(obj: SampledSignal | Sequence[float], duration: float = 1.0) -> SampledSignal:
    if isinstance(obj, SampledSignal):
        return obj
    return SampledSignal(duration, np.asarray(obj, dtype=float))
