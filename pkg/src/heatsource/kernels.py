"""Eigenfunction-series kernels for 1-D heat conduction on (0, L) with zero
Dirichlet ends, plus closed-form polynomial moments against those kernels.

Every series here decays like exp(-(n*pi/L)^2 * t), so partial sums are cut
at an a-priori bound on the first neglected term.  Moments of monomials
reduce to stable recurrences; adaptive quadrature appears only in the test
oracles, never in the library.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TruncationWarning

__all__ = [
    "TruncationPolicy",
    "DEFAULT_TRUNCATION",
    "Eigenvalue",
    "greens_function",
    "source_kernel",
    "sine_moment",
    "exp_moment",
    "sine_moment_stack",
    "exp_moment_stack",
    "mode_count",
    "sin_modes",
]

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class TruncationPolicy:
    """Cut-off rule for the eigenfunction series.

    ``tol`` bounds the magnitude of the first neglected term; ``max_terms``
    caps the number of modes regardless.  Hitting the cap before the bound
    emits a :class:`TruncationWarning`, not an error.
    """

    tol: float = 1e-12
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_terms < 1:
            raise ValueError(f"max_terms must be >= 1, got {self.max_terms}")


DEFAULT_TRUNCATION = TruncationPolicy()


@dataclass(frozen=True)
class Eigenvalue:
    """Mode index n with its spatial rate n*pi/L."""

    index: int
    value: float

    @classmethod
    def for_mode(cls, index: int, length: float) -> "Eigenvalue":
        if index < 1:
            raise ValueError(f"mode index must be >= 1, got {index}")
        if not length > 0.0:
            raise DomainError(f"length must be positive, got {length}")
        return cls(index, index * math.pi / length)


def mode_count(amplitude: float, t: float, length: float,
               trunc: TruncationPolicy) -> int:
    """Smallest mode count n with amplitude*exp(-(n*pi/L)^2 t) < trunc.tol.

    Capped (with a warning) at trunc.max_terms.
    """
    ratio = amplitude / trunc.tol
    if ratio <= 1.0:
        return 1
    needed = math.ceil(length / math.pi * math.sqrt(math.log(ratio) / t))
    needed = max(needed, 1)
    if needed > trunc.max_terms:
        warnings.warn(
            f"series cut at {trunc.max_terms} modes before the tail bound "
            f"reached tol={trunc.tol:g}",
            TruncationWarning,
            stacklevel=2,
        )
        return trunc.max_terms
    return needed


def sin_modes(x, length: float, modes: np.ndarray) -> np.ndarray:
    """sin(n*pi*x/L) for every mode n, with exact zeros where n*x/L is
    integral (so kernel values vanish identically at the rod ends).

    ``x`` may be a scalar or 1-d array; the mode axis comes last.
    """
    y = np.multiply.outer(np.asarray(x, dtype=float) / length, modes)
    r = np.round(y)
    frac = y - r
    # Snap fractional parts indistinguishable from argument rounding to 0.
    dust = np.abs(frac) <= 8.0 * _EPS * np.maximum(1.0, np.abs(y))
    frac = np.where(dust, 0.0, frac)
    sign = 1.0 - 2.0 * (r.astype(np.int64) & 1)
    return sign * np.sin(np.pi * frac)


def _check_coordinate(value, length, name):
    if not 0.0 <= value <= length:
        raise DomainError(f"{name}={value} outside [0, {length}]")


def greens_function(x: float, xi: float, t: float, length: float,
                    trunc: TruncationPolicy = DEFAULT_TRUNCATION) -> float:
    """Dirichlet heat propagator on (0, L): the sine-series kernel relating
    the temperature at (x, t) to the initial value at xi.

    Requires t > 0; the series is not uniformly convergent at t = 0.
    """
    if not length > 0.0:
        raise DomainError(f"length must be positive, got {length}")
    _check_coordinate(x, length, "x")
    _check_coordinate(xi, length, "xi")
    if not t > 0.0:
        raise DomainError(f"t must be positive, got {t}")
    n = mode_count(2.0 / length, t, length, trunc)
    modes = np.arange(1, n + 1, dtype=float)
    lam = (math.pi / length) * modes
    terms = sin_modes(x, length, modes) * sin_modes(xi, length, modes)
    return float(2.0 / length * np.dot(terms, np.exp(-lam * lam * t)))


def source_kernel(x: float, t: float, length: float,
                  trunc: TruncationPolicy = DEFAULT_TRUNCATION) -> float:
    """Response kernel for a spatially uniform source: the propagator
    integrated over the source coordinate.  Odd modes only.
    """
    if not length > 0.0:
        raise DomainError(f"length must be positive, got {length}")
    _check_coordinate(x, length, "x")
    if not t > 0.0:
        raise DomainError(f"t must be positive, got {t}")
    lam1 = math.pi / length
    n = mode_count(4.0 / (length * lam1), t, length, trunc)
    modes = np.arange(1, n + 1, 2, dtype=float)
    lam = (math.pi / length) * modes
    terms = sin_modes(x, length, modes) / lam
    return float(4.0 / length * np.dot(terms, np.exp(-lam * lam * t)))


def sine_moment_stack(max_power: int, modes, length: float) -> np.ndarray:
    """S_p = integral of xi^p * sin(n*pi*xi/L) over [0, L] for p = 0..max_power.

    Paired recurrence with the cosine moments C_p; sin(n*pi) = 0 and
    cos(n*pi) = (-1)^n are applied exactly, so the boundary terms carry no
    rounding from evaluating trigonometric functions at n*pi.

    Returns an array of shape (max_power + 1, len(modes)).
    """
    modes = np.asarray(modes, dtype=float)
    lam = (math.pi / length) * modes
    parity = 1.0 - 2.0 * (modes.astype(np.int64) & 1)  # cos(n*pi)
    out = np.empty((max_power + 1, modes.size))
    out[0] = (1.0 - parity) / lam
    c_prev = np.zeros_like(lam)  # C_0 = sin(n*pi)/lam = 0
    length_p = 1.0
    for p in range(1, max_power + 1):
        length_p *= length
        out[p] = (-length_p * parity + p * c_prev) / lam
        c_prev = -p * out[p - 1] / lam  # C_p; the L^p sin(n*pi) term is 0
    return out


def sine_moment(m: int, n: int, length: float) -> float:
    """Closed-form integral of xi^(m-1) * sin(n*pi*xi/L) over [0, L]."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not length > 0.0:
        raise DomainError(f"length must be positive, got {length}")
    return float(sine_moment_stack(m - 1, np.array([n]), length)[m - 1, 0])


_SERIES_SWITCH_BASE = 30.0


def exp_moment_stack(max_power: int, lam_sq, t) -> np.ndarray:
    """J_p = integral of tau^p * exp(-lam_sq*(t - tau)) over [0, t] for
    p = 0..max_power on the outer (lam_sq, t) grid.

    The forward recurrence J_p = (t^p - p*J_{p-1})/lam_sq is stable once
    a = lam_sq*t is well above p, but cancels catastrophically below that;
    small arguments switch to the positive-term series
    J_p = t^(p+1) * exp(-a) * sum_j a^j / (j! * (p+1+j)).

    Returns an array of shape (max_power + 1, len(lam_sq), len(t)).
    """
    lam_sq = np.asarray(lam_sq, dtype=float)
    t = np.asarray(t, dtype=float)
    a = np.multiply.outer(lam_sq, t)
    out = np.empty((max_power + 1,) + a.shape)
    ls = lam_sq[:, None]
    j = -np.expm1(-a) / ls
    out[0] = j
    t_pow = np.ones_like(t)
    for p in range(1, max_power + 1):
        t_pow = t_pow * t
        j = (t_pow[None, :] - p * j) / ls
        out[p] = j
    switch = max(_SERIES_SWITCH_BASE, 2.0 * max_power)
    small = a < switch
    if np.any(small):
        t_grid = np.broadcast_to(t, a.shape)
        out[:, small] = _exp_moment_series(max_power, a[small], t_grid[small])
    return out


def _exp_moment_series(max_power: int, a: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Positive-term series for J_p on flat arrays a = lam_sq*t and t."""
    powers = np.arange(max_power + 1, dtype=float)
    acc = np.zeros((max_power + 1, a.size))
    term = np.ones_like(a)  # a^j / j!
    limit = int(a.max(initial=0.0)) + 80
    for j in range(limit):
        acc += term[None, :] / (powers[:, None] + 1.0 + j)
        if term.max(initial=0.0) < 1e-20:
            break
        term = term * a / (j + 1.0)
    damp = np.exp(-a)
    out = np.empty_like(acc)
    t_pow = t.copy()  # t^(p+1)
    for p in range(max_power + 1):
        out[p] = t_pow * damp * acc[p]
        t_pow = t_pow * t
    return out


def exp_moment(k: int, lam_sq: float, t: float) -> float:
    """Closed-form integral of tau^(k-1) * exp(-lam_sq*(t - tau)) over [0, t]."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not lam_sq > 0.0:
        raise ValueError(f"lam_sq must be positive, got {lam_sq}")
    if t < 0.0:
        raise DomainError(f"t must be nonnegative, got {t}")
    stack = exp_moment_stack(k - 1, np.array([lam_sq]), np.array([t]))
    return float(stack[k - 1, 0, 0])
