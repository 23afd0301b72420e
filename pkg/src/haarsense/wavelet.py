"""Haar and Walsh bases on [0, 1), quadrature transforms and reconstruction.

Haar functions are indexed by order ``i >= 1`` and shift
``0 <= j < 2**(i-1)``; ``h_i^j`` is ``+2**((i-1)/2)`` on the first half of
``[j, j+1) / 2**(i-1)`` and the negative of that on the second half. The
order-0 function is the constant 1, so ``c0`` is the mean of the signal.

Walsh functions are sequency ordered: ``w_m`` has exactly ``m`` sign changes
on [0, 1) and is built as a product of Rademacher functions selected by the
Gray code of ``m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterator, Mapping

import numpy as np

from .errors import DomainError, OrderError, ResolutionError
from .signals import SampledSignal, as_signal


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~((x >= 0) & (x < 1))):
        raise DomainError("x must lie in [0, 1)")
    return x


# --- Haar -----------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicIndex:
    order: int
    shift: int

    def __post_init__(self):
        if self.order < 1:
            raise DomainError(f"order must be >= 1, got {self.order}")
        if not 0 <= self.shift < 2 ** (self.order - 1):
            raise DomainError(
                f"shift {self.shift} out of range for order {self.order}")

    @property
    def height(self) -> float:
        return 2.0 ** ((self.order - 1) / 2)

    @property
    def support(self) -> tuple[float, float]:
        w = 2.0 ** -(self.order - 1)
        return self.shift * w, (self.shift + 1) * w


def _haar_raw(order: int, shift, x: np.ndarray) -> np.ndarray:
    # scaling by a power of two is exact, so the bin tests are exact too
    y = x * 2.0 ** (order - 1) - shift
    h = 2.0 ** ((order - 1) / 2)
    return np.where((y >= 0) & (y < 0.5), h, np.where((y >= 0.5) & (y < 1), -h, 0.0))


def haar_eval(idx: DyadicIndex, x):
    """Value of ``h_i^j`` at ``x`` (scalar or array) in [0, 1)."""
    xa = _check_unit(x)
    out = _haar_raw(idx.order, idx.shift, xa)
    return float(out) if out.ndim == 0 else out


def haar_level_signs(order: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shift index and +/-1 sign of the single order-``order`` function live at ``x``."""
    y = x * 2.0 ** (order - 1)
    shift = np.floor(y).astype(np.int64)
    sign = np.where(y - shift < 0.5, 1.0, -1.0)
    return shift, sign


@dataclass(frozen=True)
class HaarCoefficients:
    """``c0`` plus detail coefficients ``c_i^j`` with uncertainties.

    ``levels[i-1]`` and ``sigmas[i-1]`` hold the ``2**(i-1)`` values of order
    ``i``. ``measured_orders`` is ``None`` when every order was measured;
    sparse runs record which levels carry data (the rest are zero).
    """

    mean: float
    levels: tuple = ()
    sigmas: tuple | None = None
    mean_sigma: float = 0.0
    measured_orders: frozenset | None = None
    provenance: Mapping = field(default_factory=dict)

    def __post_init__(self):
        levels = tuple(_readonly(v) for v in self.levels)
        if self.sigmas is None:
            sigmas = tuple(_readonly(np.zeros_like(v)) for v in levels)
        else:
            sigmas = tuple(_readonly(s) for s in self.sigmas)
        if len(sigmas) != len(levels):
            raise ValueError("levels and sigmas disagree on max order")
        for i, (v, s) in enumerate(zip(levels, sigmas), start=1):
            if v.shape != (2 ** (i - 1),) or s.shape != v.shape:
                raise ValueError(f"order {i} must hold exactly {2 ** (i - 1)} entries")
            if np.any(s < 0) or np.any(np.isnan(s)):
                raise ValueError("sigmas must be >= 0")
        if self.mean_sigma < 0:
            raise ValueError("mean sigma must be >= 0")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "mean_sigma", float(self.mean_sigma))
        if self.measured_orders is not None:
            orders = frozenset(int(o) for o in self.measured_orders)
            if not orders or min(orders) < 1 or max(orders) > len(levels):
                raise ValueError("measured orders outside stored levels")
            object.__setattr__(self, "measured_orders", orders)
        object.__setattr__(self, "provenance", MappingProxyType(dict(self.provenance)))

    @property
    def max_order(self) -> int:
        return len(self.levels)

    @classmethod
    def zeros(cls, n: int, **kw) -> "HaarCoefficients":
        return cls(0.0, tuple(np.zeros(2 ** (i - 1)) for i in range(1, n + 1)), **kw)

    def value(self, order: int, shift: int) -> float:
        if order == 0:
            return self.mean
        return float(self.levels[order - 1][shift])

    def sigma(self, order: int, shift: int) -> float:
        if order == 0:
            return self.mean_sigma
        return float(self.sigmas[order - 1][shift])

    def items(self) -> Iterator[tuple[int, int, float, float]]:
        """Yield ``(order, shift, value, sigma)`` for every detail coefficient."""
        for i, (v, s) in enumerate(zip(self.levels, self.sigmas), start=1):
            for j in range(v.size):
                yield i, j, float(v[j]), float(s[j])

    def restricted(self, orders, keep_mean: bool = False) -> "HaarCoefficients":
        """Copy with every level outside ``orders`` zeroed (and ``c0`` unless kept)."""
        orders = frozenset(orders)
        levels = [v if i in orders else np.zeros_like(v)
                  for i, v in enumerate(self.levels, start=1)]
        sigmas = [s if i in orders else np.zeros_like(s)
                  for i, s in enumerate(self.sigmas, start=1)]
        return HaarCoefficients(
            self.mean if keep_mean else 0.0, tuple(levels), tuple(sigmas),
            self.mean_sigma if keep_mean else 0.0, orders, self.provenance)


@dataclass(frozen=True)
class Reconstruction:
    """Piecewise-constant field on ``2**order`` dyadic bins, with 1-sigma errors."""

    points: np.ndarray
    sigmas: np.ndarray
    order: int
    provenance: Mapping = field(default_factory=dict)

    def __post_init__(self):
        p, s = _readonly(self.points), _readonly(self.sigmas)
        if p.shape != s.shape or p.shape != (2 ** self.order,):
            raise ValueError("points and sigmas must both hold 2**order values")
        if np.any(s < 0):
            raise ValueError("sigmas must be >= 0")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "sigmas", s)
        object.__setattr__(self, "provenance", MappingProxyType(dict(self.provenance)))

    @property
    def bin_centers(self) -> np.ndarray:
        """Bin centers on the unit interval."""
        return (np.arange(self.points.size) + 0.5) / self.points.size


def _check_resolution(n_samples: int, n: int) -> None:
    if n < 0:
        raise OrderError("order must be >= 0")
    if n_samples < 2 ** n:
        raise ResolutionError(
            f"{n_samples} samples leave fewer than one sample per finest "
            f"half-interval at order {n}")


def haar_transform(signal, n: int) -> HaarCoefficients:
    """Haar coefficients up to order ``n`` by midpoint quadrature.

    ``signal`` is a :class:`SampledSignal` (or a bare sample array taken over
    the unit interval). The time axis is rescaled by ``x = t/T``, so the result
    does not depend on the signal duration. All sigmas are zero.
    """
    signal = as_signal(signal)
    f = signal.samples
    N = f.size
    _check_resolution(N, n)
    x = signal.unit_times
    levels = []
    for i in range(1, n + 1):
        shift, sign = haar_level_signs(i, x)
        sums = np.bincount(shift, weights=f * sign, minlength=2 ** (i - 1))
        levels.append(sums * (2.0 ** ((i - 1) / 2) / N))
    return HaarCoefficients(float(f.mean()), tuple(levels),
                            provenance={"source": "transform"})


def _check_order(coeffs: HaarCoefficients, n: int) -> None:
    if not 0 <= n <= coeffs.max_order:
        raise OrderError(f"order {n} outside 0..{coeffs.max_order}")


def haar_partial_sum(coeffs: HaarCoefficients, n: int, x):
    """``S_n(x) = c0 + sum_{i<=n} sum_j c_i^j h_i^j(x)``; ``x`` scalar or array."""
    _check_order(coeffs, n)
    xa = _check_unit(x)
    flat = np.atleast_1d(xa)
    total = np.full(flat.shape, coeffs.mean)
    for i in range(1, n + 1):
        shift, sign = haar_level_signs(i, flat)
        total = total + coeffs.levels[i - 1][shift] * sign * 2.0 ** ((i - 1) / 2)
    return float(total[0]) if xa.ndim == 0 else total.reshape(xa.shape)


def haar_reconstruct_points(coeffs: HaarCoefficients, n: int,
                            provenance: Mapping | None = None) -> Reconstruction:
    """``S_n`` at the ``2**n`` bin centers with independent-error propagation."""
    _check_order(coeffs, n)
    x = (np.arange(2 ** n) + 0.5) / 2 ** n
    values = np.full(x.size, coeffs.mean)
    var = np.full(x.size, coeffs.mean_sigma ** 2)
    for i in range(1, n + 1):
        shift, sign = haar_level_signs(i, x)
        h = 2.0 ** ((i - 1) / 2)
        values = values + coeffs.levels[i - 1][shift] * sign * h
        var = var + coeffs.sigmas[i - 1][shift] ** 2 * h * h
    prov = dict(coeffs.provenance)
    if provenance:
        prov.update(provenance)
    return Reconstruction(values, np.sqrt(var), n, prov)


# --- Walsh ----------------------------------------------------------------------

def gray_code(m: int) -> int:
    return m ^ (m >> 1)


def _walsh_raw(m: int, x: np.ndarray) -> np.ndarray:
    g = gray_code(m)
    parity = np.zeros(x.shape, dtype=np.int64)
    k = 0
    while g:
        if g & 1:
            # Rademacher r_{k+1}(x) = (-1)**floor(2**(k+1) x)
            parity += np.floor(x * 2.0 ** (k + 1)).astype(np.int64)
        g >>= 1
        k += 1
    return np.where(parity % 2 == 0, 1.0, -1.0)


def walsh_eval(m: int, x):
    """Sequency-ordered Walsh function ``w_m`` at ``x`` in [0, 1)."""
    if m < 0:
        raise DomainError("Walsh index must be >= 0")
    xa = _check_unit(x)
    out = _walsh_raw(int(m), xa)
    return float(out) if out.ndim == 0 else out


def walsh_sign_changes(m: int) -> list[float]:
    """Positions in (0, 1) where ``w_m`` flips sign; there are exactly ``m``."""
    if m == 0:
        return []
    cells = 2 ** max(1, m.bit_length())
    vals = _walsh_raw(m, (np.arange(cells) + 0.5) / cells)
    return [k / cells for k in range(1, cells) if vals[k] != vals[k - 1]]


@dataclass(frozen=True)
class WalshSpectrum:
    """Sequency-ordered Walsh coefficients ``a_0 .. a_{2**n - 1}``."""

    coefficients: np.ndarray
    order: int
    sigmas: np.ndarray | None = None
    provenance: Mapping = field(default_factory=dict)

    def __post_init__(self):
        c = _readonly(self.coefficients)
        if c.shape != (2 ** self.order,):
            raise ValueError(f"need exactly {2 ** self.order} coefficients")
        s = _readonly(np.zeros_like(c) if self.sigmas is None else self.sigmas)
        if s.shape != c.shape or np.any(s < 0):
            raise ValueError("sigmas must match coefficients and be >= 0")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "sigmas", s)
        object.__setattr__(self, "provenance", MappingProxyType(dict(self.provenance)))


def walsh_transform(signal, n: int) -> WalshSpectrum:
    signal = as_signal(signal)
    f = signal.samples
    _check_resolution(f.size, n)
    x = signal.unit_times
    coeffs = np.array([np.mean(f * _walsh_raw(m, x)) for m in range(2 ** n)])
    return WalshSpectrum(coeffs, n, provenance={"source": "transform"})


def _walsh_matrix(n: int) -> np.ndarray:
    x = (np.arange(2 ** n) + 0.5) / 2 ** n
    return np.array([_walsh_raw(m, x) for m in range(2 ** n)])


def walsh_inverse(spectrum) -> np.ndarray:
    """Values at the ``2**n`` bin centers from a spectrum (or raw coefficient array)."""
    coeffs = np.asarray(getattr(spectrum, "coefficients", spectrum), dtype=float)
    n = int(round(math.log2(coeffs.size))) if coeffs.size else -1
    if coeffs.ndim != 1 or n < 0 or 2 ** n != coeffs.size:
        raise ValueError(f"spectrum length {coeffs.size} is not a power of two")
    return coeffs @ _walsh_matrix(n)


def walsh_reconstruct_points(spectrum: WalshSpectrum) -> Reconstruction:
    # w_m**2 == 1 everywhere, so every point carries the full variance sum
    sig = np.full(2 ** spectrum.order, math.sqrt(float(np.sum(spectrum.sigmas ** 2))))
    return Reconstruction(walsh_inverse(spectrum), sig, spectrum.order,
                          spectrum.provenance)


# --- Gram matrices --------------------------------------------------------------

def haar_basis_matrix(n: int) -> np.ndarray:
    """Rows: ``1`` then every ``h_i^j`` (i <= n) on the finest dyadic cells.

    Every basis function is constant on cells of width ``2**-n``, so
    ``B @ B.T / 2**n`` is the exact piecewise integral of all pairwise products.
    """
    x = (np.arange(2 ** n) + 0.5) / 2 ** n
    rows = [np.ones_like(x)]
    for i in range(1, n + 1):
        for j in range(2 ** (i - 1)):
            rows.append(_haar_raw(i, j, x))
    return np.array(rows)


def haar_gram(n: int) -> np.ndarray:
    B = haar_basis_matrix(n)
    return B @ B.T / 2 ** n


def walsh_gram(n: int) -> np.ndarray:
    W = _walsh_matrix(n)
    return W @ W.T / 2 ** n
