"""Haar, Walsh and sequential-Ramsey sensing protocols over the simulated sensor.

A protocol turns a signal into coefficients by laying out pulse sequences
over repeated runs of the signal, measuring each sequence's phase and
converting phases to field coefficients.

Packing. Echoes of one order tile the signal window back to back. A sensor
needs ``overhead`` microseconds between two echoes of the same run to read
out and re-initialize, so echoes ``j`` and ``j + s`` share a run only when
``(s - 1) * tau >= overhead``. Order ``i`` therefore needs
``min(2**(i-1), 1 + ceil(overhead / tau_i))`` runs; with zero overhead each
order fits in one run.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import PackingError, PhaseWrapError
from .signals import SampledSignal
from .spinsim import (EchoSequence, FreePrecession, SensorParams, WalshSequence,
                      accumulate_phase, estimate_phase, ideal_phase,
                      simulate_readout, substream, UT_US)
from .wavelet import HaarCoefficients, Reconstruction, WalshSpectrum

CONVENTIONS = {"integral": 1.0, "paper": math.pi / 2}
# readout and re-arm time between consecutive signal runs, microseconds
DEFAULT_RUN_OVERHEAD = 2.0

# first element of every measurement's random-stream key
_KEY_MEAN, _KEY_HAAR, _KEY_WALSH, _KEY_RAMSEY = 0, 1, 2, 3


# --- plans & budgets ------------------------------------------------------------

@dataclass(frozen=True)
class ProtocolPlan:
    """Sequence layout: ``runs[r]`` lists the sequences played during signal run ``r``."""

    kind: str
    order: int
    duration: float
    repetitions: int | None
    overhead: float
    runs: tuple
    orders: tuple = ()
    run_overhead: float = DEFAULT_RUN_OVERHEAD

    @property
    def sequences(self) -> list:
        return [s for run in self.runs for s in run]


@dataclass(frozen=True)
class RunBudget:
    signal_runs_per_sweep: int
    total_runs: int
    wall_estimate: float  # seconds

    def as_dict(self) -> dict:
        return {"signal_runs_per_sweep": self.signal_runs_per_sweep,
                "total_runs": self.total_runs,
                "wall_estimate_s": self.wall_estimate}


def _stride(tau: float, overhead: float) -> int:
    return 1 + max(0, math.ceil(overhead / tau - 1e-12))


def runs_for_order(order: int, duration: float, overhead: float = 0.0) -> int:
    """Signal runs needed to measure every coefficient of one Haar order."""
    tau = duration / 2 ** (order - 1)
    return min(2 ** (order - 1), _stride(tau, overhead))


def _pack(seqs: list, window: float, overhead: float) -> list[tuple]:
    """Split back-to-back sequences of one length into runs by stride."""
    tau = seqs[0].duration
    if tau > window * (1 + 1e-12) or seqs[-1].stop > window * (1 + 1e-12):
        raise PackingError(f"sequence of {tau} us does not fit a {window} us run")
    s = min(len(seqs), _stride(tau, overhead))
    return [tuple(seqs[r::s]) for r in range(s)]


def _check_plan_args(T, overhead, M):
    if not T > 0:
        raise ValueError("duration must be > 0")
    if overhead < 0:
        raise ValueError("overhead must be >= 0")
    if M is not None and M < 1:
        raise ValueError("repetitions must be >= 1")


def _finish(plan: ProtocolPlan, max_runs: int | None) -> ProtocolPlan:
    if max_runs is not None and len(plan.runs) > max_runs:
        raise PackingError(
            f"{plan.kind} plan needs {len(plan.runs)} runs per sweep, limit is {max_runs}")
    return plan


def plan_haar(n: int, T: float, M: int | None = None, overhead: float = 0.0, *,
              orders=None, include_mean: bool = True,
              run_overhead: float = DEFAULT_RUN_OVERHEAD,
              max_runs: int | None = None) -> ProtocolPlan:
    """Layout for Haar orders ``1..n`` (or the subset ``orders``).

    One extra free-precession run over the full window measures ``c0`` when
    ``include_mean`` is set.
    """
    if n < 1:
        raise ValueError("Haar plan needs n >= 1")
    _check_plan_args(T, overhead, M)
    orders = tuple(sorted(set(range(1, n + 1) if orders is None else orders)))
    if not orders or orders[0] < 1 or orders[-1] > n:
        raise ValueError(f"orders must be a non-empty subset of 1..{n}")
    runs = [(FreePrecession(0.0, T),)] if include_mean else []
    for i in orders:
        tau = T / 2 ** (i - 1)
        echoes = [EchoSequence(j * tau, tau) for j in range(2 ** (i - 1))]
        runs.extend(_pack(echoes, T, overhead))
    return _finish(ProtocolPlan("haar", n, T, M, overhead, tuple(runs), orders,
                                run_overhead), max_runs)


def plan_walsh(n: int, T: float, M: int | None = None, overhead: float = 0.0, *,
               run_overhead: float = DEFAULT_RUN_OVERHEAD,
               max_runs: int | None = None) -> ProtocolPlan:
    """One full-window Walsh sequence per coefficient, one signal run each."""
    if n < 0:
        raise ValueError("Walsh plan needs n >= 0")
    _check_plan_args(T, overhead, M)
    runs = []
    for m in range(2 ** n):
        runs.extend(_pack([WalshSequence(m, 0.0, T)], T, overhead))
    return _finish(ProtocolPlan("walsh", n, T, M, overhead, tuple(runs),
                                run_overhead=run_overhead), max_runs)


def plan_ramsey(N: int, T: float, M: int | None = None, overhead: float = 0.0, *,
                run_overhead: float = DEFAULT_RUN_OVERHEAD,
                max_runs: int | None = None) -> ProtocolPlan:
    n = int(round(math.log2(N))) if N >= 1 else -1
    if n < 0 or 2 ** n != N:
        raise ValueError(f"Ramsey point count must be a power of two, got {N}")
    _check_plan_args(T, overhead, M)
    tau = T / N
    intervals = [FreePrecession(k * tau, tau) for k in range(N)]
    return _finish(ProtocolPlan("ramsey", n, T, M, overhead,
                                tuple(_pack(intervals, T, overhead)),
                                run_overhead=run_overhead), max_runs)


def run_budget(plan: ProtocolPlan) -> RunBudget:
    """Runs per sweep, total runs over ``M`` repetitions and a wall-clock estimate.

    A noiseless plan (``M=None``) counts as a single sweep.
    """
    per_sweep = len(plan.runs)
    total = per_sweep * (plan.repetitions or 1)
    wall = total * (plan.duration + plan.run_overhead) * 1e-6
    return RunBudget(per_sweep, total, wall)


# --- phase -> coefficient -------------------------------------------------------

def phase_to_coefficient(phi: float, order: int, tau: float, gamma: float,
                         convention: str = "integral") -> float:
    """Haar coefficient (microtesla) from the phase of its echo.

    ``"integral"`` returns ``2**(-(i-1)/2) phi / (gamma tau)``, the value that
    makes echo and Haar projection agree; ``"paper"`` multiplies that by pi/2.
    """
    try:
        factor = CONVENTIONS[convention]
    except KeyError:
        raise ValueError(f"unknown convention {convention!r}") from None
    return factor * 2.0 ** (-(order - 1) / 2) * phi / (gamma * UT_US * tau)


# --- measurement engine ---------------------------------------------------------

def _measure(signal, params, seq, M, seed, key):
    phi = accumulate_phase(signal, seq, params.gamma)
    try:
        # the readout cannot tell phi from pi - phi, so a true phase past the
        # branch is refused even when the noisy contrast happens to invert
        exact = ideal_phase(phi)
        if M is None:
            return exact
        outcome = simulate_readout(phi, seq.duration, params, M,
                                   substream(seed, *key), seq.pi_pulses)
        return estimate_phase(outcome, seq.duration, params, seq.pi_pulses)
    except PhaseWrapError as exc:
        raise PhaseWrapError(f"{exc} (measurement {key})", location=key) from None


def _measure_all(signal, params, tasks, M, seed, workers: int = 1):
    """Phases for ``[(key, seq), ...]`` in task order.

    Each task draws from its own keyed stream, so thread count cannot change
    the result.
    """
    def one(task):
        key, seq = task
        return _measure(signal, params, seq, M, seed, key)

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, tasks))
    return [one(t) for t in tasks]


def _mean_term(c0, signal, params, M, seed):
    """``(value, sigma, label)`` for the order-0 coefficient.

    ``c0`` is ``"ramsey"`` (one free-precession run over the window),
    ``"zero"``, a number, or a ``(value, sigma)`` pair supplied externally.
    """
    if isinstance(c0, str):
        if c0 == "zero":
            return 0.0, 0.0, "zero"
        if c0 != "ramsey":
            raise ValueError(f"unknown c0 mode {c0!r}")
        T = signal.duration
        phi, s = _measure(signal, params, FreePrecession(0.0, T), M, seed,
                          (_KEY_MEAN, 0))
        g = params.gamma * UT_US * T
        return phi / g, s / g, "ramsey"
    if c0 is None:
        return 0.0, 0.0, "zero"
    if isinstance(c0, (tuple, list)):
        value, sigma = c0
        return float(value), float(sigma), "external"
    return float(c0), 0.0, "external"


def _provenance(kind, M, seed, **extra) -> dict:
    prov = {"protocol": kind, "repetitions": M, "seed": seed}
    prov.update(extra)
    return prov


def run_haar_protocol(signal: SampledSignal, params: SensorParams, n: int,
                      M: int | None, seed=0, *, convention: str = "integral",
                      c0="ramsey", overhead: float = 0.0, orders=None,
                      workers: int = 1, max_runs: int | None = None
                      ) -> HaarCoefficients:
    """Measure Haar coefficients up to order ``n`` with spin echoes.

    Parameters
    ----------
    signal : SampledSignal
        Field to sense; its duration is the Haar window ``T``.
    n : int
        Highest order.
    M : int or None
        Repetitions per sequence. ``None`` is the infinite-repetition limit:
        exact phases, zero sigmas.
    seed : int
        Root of the per-measurement random streams.
    convention : {"integral", "paper"}
        Phase-to-coefficient constant, see :func:`phase_to_coefficient`.
    c0 : str, float or (float, float)
        How the mean is obtained, see :func:`_mean_term`.
    orders : iterable of int, optional
        Measure only these orders; the others stay zero.

    Returns
    -------
    HaarCoefficients
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    T = signal.duration
    plan = plan_haar(n, T, M, overhead, orders=orders, include_mean=False,
                     max_runs=max_runs)
    tasks = []
    for i in plan.orders:
        tau = T / 2 ** (i - 1)
        for j in range(2 ** (i - 1)):
            tasks.append(((_KEY_HAAR, i, j), EchoSequence(j * tau, tau)))
    phases = _measure_all(signal, params, tasks, M, seed, workers)

    levels = [np.zeros(2 ** (i - 1)) for i in range(1, n + 1)]
    sigmas = [np.zeros(2 ** (i - 1)) for i in range(1, n + 1)]
    for ((_, i, j), seq), (phi, s) in zip(tasks, phases):
        levels[i - 1][j] = phase_to_coefficient(phi, i, seq.tau, params.gamma, convention)
        sigmas[i - 1][j] = abs(phase_to_coefficient(s, i, seq.tau, params.gamma, convention))

    mean, mean_sigma, label = _mean_term(c0, signal, params, M, seed)
    measured = None if orders is None else frozenset(plan.orders)
    prov = _provenance("haar" if orders is None else "sparse_haar", M, seed,
                       convention=convention, c0=label, duration_us=T)
    return HaarCoefficients(mean, tuple(levels), tuple(sigmas), mean_sigma,
                            measured, prov)


def run_sparse_haar(signal: SampledSignal, params: SensorParams, orders, M, seed=0,
                    **kw) -> HaarCoefficients:
    """Measure only the listed orders; ``c0`` is fixed to zero."""
    orders = sorted(set(orders))
    if not orders:
        raise ValueError("sparse Haar run needs at least one order")
    return run_haar_protocol(signal, params, max(orders), M, seed, orders=orders,
                             c0="zero", **kw)


def run_walsh_protocol(signal: SampledSignal, params: SensorParams, n: int,
                       M: int | None, seed=0, *, c0="ramsey", overhead: float = 0.0,
                       workers: int = 1, max_runs: int | None = None
                       ) -> tuple[WalshSpectrum, RunBudget]:
    """Measure the ``2**n`` sequency-ordered Walsh coefficients.

    ``w_0`` has no pi pulses, so the ``m = 0`` run is a free precession over
    the window; ``c0`` other than ``"ramsey"`` replaces it, as in the Haar path.
    """
    T = signal.duration
    plan = plan_walsh(n, T, M, overhead, max_runs=max_runs)
    first = 0 if c0 == "ramsey" else 1
    tasks = [((_KEY_WALSH, m), WalshSequence(m, 0.0, T)) for m in range(first, 2 ** n)]
    phases = _measure_all(signal, params, tasks, M, seed, workers)
    g = params.gamma * UT_US * T
    coeffs = np.zeros(2 ** n)
    sig = np.zeros(2 ** n)
    for ((_, m), _seq), (phi, s) in zip(tasks, phases):
        coeffs[m], sig[m] = phi / g, s / g
    label = "ramsey"
    if first:
        coeffs[0], sig[0], label = _mean_term(c0, signal, params, M, seed)
    spectrum = WalshSpectrum(coeffs, n, sig,
                             _provenance("walsh", M, seed, c0=label, duration_us=T))
    return spectrum, run_budget(plan)


def run_ramsey_protocol(signal: SampledSignal, params: SensorParams, N: int,
                        M: int | None, seed=0, *, overhead: float = 0.0,
                        warn_factor: float = 10.0, workers: int = 1) -> Reconstruction:
    """``N`` successive free-precession averages of the field.

    Warns when the interval ``T/N`` is more than ``warn_factor`` away from
    T2* in either direction.
    """
    T = signal.duration
    plan = plan_ramsey(N, T, M, overhead)
    tau = T / N
    if not params.t2_star / warn_factor <= tau <= params.t2_star * warn_factor:
        warnings.warn(f"Ramsey interval {tau:.3g} us is far from T2* = "
                      f"{params.t2_star:.3g} us", RuntimeWarning, stacklevel=2)
    tasks = [((_KEY_RAMSEY, k), FreePrecession(k * tau, tau)) for k in range(N)]
    phases = _measure_all(signal, params, tasks, M, seed, workers)
    g = params.gamma * UT_US * tau
    points = np.array([phi / g for phi, _ in phases])
    sigmas = np.array([s / g for _, s in phases])
    return Reconstruction(points, sigmas, plan.order,
                          _provenance("ramsey", M, seed, duration_us=T))


# --- event detection ------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    bin: int
    polarity: int
    magnitude: float


@dataclass(frozen=True)
class EventDetection:
    events: tuple
    threshold_sigma: float
    order: int = 0

    def bin_times(self, duration: float) -> list[float]:
        """Bin-center times of the events, in the units of ``duration``."""
        return [(e.bin + 0.5) * duration / 2 ** self.order for e in self.events]


def detect_events(recon: Reconstruction, threshold_sigma: float,
                  floor: float = 0.0, merge_gap: int = 0) -> EventDetection:
    """Group supra-threshold bins into signed events.

    A bin qualifies when ``|value| >= max(threshold_sigma * sigma, floor)`` and
    the value is nonzero. Qualifying bins separated by at most ``merge_gap``
    non-qualifying bins form one event whatever their signs: a band-pass
    reconstruction renders a single transient as neighbouring lobes of
    opposite sign. Each event sits at its largest magnitude (lowest bin on
    ties) and takes that bin's sign.
    """
    if merge_gap < 0:
        raise ValueError("merge_gap must be >= 0")
    v = recon.points
    limit = np.maximum(threshold_sigma * recon.sigmas, floor)
    hits = np.flatnonzero((np.abs(v) >= limit) & (v != 0))
    events = []
    if hits.size:
        breaks = np.flatnonzero(np.diff(hits) > merge_gap + 1) + 1
        for cluster in np.split(hits, breaks):
            # argmax returns the first maximum, i.e. the lowest bin on ties
            peak = int(cluster[np.argmax(np.abs(v[cluster]))])
            events.append(Event(peak, 1 if v[peak] > 0 else -1, float(abs(v[peak]))))
    return EventDetection(tuple(events), float(threshold_sigma), recon.order)
