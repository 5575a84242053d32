"""Parametrized temperature responses, their sensitivity tables on a
measurement mesh, and the direction responses used by the exact line search.

The model is linear in the polynomial coefficients: the temperature at any
point is a fixed linear functional of (phi, theta), assembled per harmonic
from the closed-form kernel moments.  All spatial math runs in the shifted
frame x' = x - offset in [0, L]; only user-facing values carry the offset.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (ContractViolationError, DomainError,
                     ShapeMismatchError, TruncationWarning)
from .kernels import (
    DEFAULT_TRUNCATION,
    TruncationPolicy,
    exp_moment_stack,
    mode_count,
    sin_modes,
    sine_moment_stack,
)

__all__ = [
    "Geometry",
    "PolyParams",
    "MeasurementMesh",
    "SensitivityTables",
    "sensitivity_tables",
    "eval_u_final",
    "eval_u_interior",
    "direction_response",
]


@dataclass(frozen=True)
class Geometry:
    """Rod geometry and measurement setup.

    ``offset`` is the physical coordinate of the left end; ``sensor`` is the
    interior measurement point in the physical frame.
    """

    offset: float
    length: float
    t_final: float
    sensor: float

    def __post_init__(self):
        if not self.length > 0.0:
            raise DomainError(f"length must be positive, got {self.length}")
        if not self.t_final > 0.0:
            raise DomainError(f"t_final must be positive, got {self.t_final}")
        if not self.offset < self.sensor < self.offset + self.length:
            raise DomainError(
                f"sensor={self.sensor} must lie strictly inside "
                f"({self.offset}, {self.offset + self.length})"
            )

    @property
    def sensor_shifted(self) -> float:
        return self.sensor - self.offset

    def to_shifted(self, x):
        return np.asarray(x, dtype=float) - self.offset

    def to_physical(self, x_shifted):
        return np.asarray(x_shifted, dtype=float) + self.offset

    def with_sensor(self, sensor: float) -> "Geometry":
        return replace(self, sensor=sensor)


@dataclass
class PolyParams:
    """Coefficients of the source polynomial (phi, powers of t) and of the
    initial-temperature polynomial (theta, powers of the shifted x)."""

    phi: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        self.phi = np.atleast_1d(np.asarray(self.phi, dtype=float)).copy()
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).copy()
        if self.phi.ndim != 1 or self.phi.size < 1:
            raise ShapeMismatchError("phi must be a nonempty 1-d vector")
        if self.theta.ndim != 1 or self.theta.size < 1:
            raise ShapeMismatchError("theta must be a nonempty 1-d vector")

    @classmethod
    def zeros(cls, n_x: int, n_t: int) -> "PolyParams":
        return cls(phi=np.zeros(n_t), theta=np.zeros(n_x))

    @property
    def n_t(self) -> int:
        return self.phi.size

    @property
    def n_x(self) -> int:
        return self.theta.size

    def source_values(self, t):
        """F(t) = sum_k phi_k t^(k-1)."""
        return npoly.polyval(np.asarray(t, dtype=float), self.phi)

    def initial_values(self, x_shifted):
        """u0(x') = sum_m theta_m x'^(m-1) in the shifted frame."""
        return npoly.polyval(np.asarray(x_shifted, dtype=float), self.theta)

    def copy(self) -> "PolyParams":
        return PolyParams(phi=self.phi, theta=self.theta)


@dataclass(frozen=True, eq=False)
class MeasurementMesh:
    """Equispaced sample nodes: x_nodes on [0, L] (shifted frame) and t_nodes
    on [0, t_f], endpoints included.  Data sums and sensitivity tables use
    the nodes from index 1 on; error metrics use all of them."""

    x_nodes: np.ndarray
    t_nodes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_nodes", np.asarray(self.x_nodes, dtype=float))
        object.__setattr__(self, "t_nodes", np.asarray(self.t_nodes, dtype=float))
        for name, nodes in (("x_nodes", self.x_nodes), ("t_nodes", self.t_nodes)):
            if nodes.ndim != 1 or nodes.size < 2:
                raise ShapeMismatchError(f"{name} needs at least two nodes")
            if nodes[0] != 0.0:
                raise DomainError(f"{name} must start at 0, got {nodes[0]}")
            if not np.all(np.diff(nodes) > 0.0):
                raise DomainError(f"{name} must be strictly increasing")

    @classmethod
    def regular(cls, geom: Geometry, i_x: int, i_t: int) -> "MeasurementMesh":
        if i_x < 1 or i_t < 1:
            raise DomainError(f"mesh sizes must be >= 1, got i_x={i_x}, i_t={i_t}")
        return cls(
            x_nodes=np.linspace(0.0, geom.length, i_x + 1),
            t_nodes=np.linspace(0.0, geom.t_final, i_t + 1),
        )

    @property
    def i_x(self) -> int:
        return self.x_nodes.size - 1

    @property
    def i_t(self) -> int:
        return self.t_nodes.size - 1

    @property
    def x_interior(self) -> np.ndarray:
        return self.x_nodes[1:]

    @property
    def t_interior(self) -> np.ndarray:
        return self.t_nodes[1:]


# ---------------------------------------------------------------------------
# response-matrix builders
# ---------------------------------------------------------------------------


def _theta_modes(n_theta: int, t_min: float, length: float,
                 trunc: TruncationPolicy) -> np.ndarray:
    # Term bound: (2/L) * max_p |S_p| * exp(-lam^2 t), |S_p| <= L^(p+1)/(p+1).
    amp = 2.0 / length * max(
        length ** (p + 1) / (p + 1) for p in range(n_theta)
    )
    n = mode_count(amp, t_min, length, trunc)
    return np.arange(1, n + 1, dtype=float)


def _theta_weights(n_theta: int, modes: np.ndarray, length: float) -> np.ndarray:
    """Per-mode moment weights S_(m-1)(lam_n), shape (n_theta, n_modes)."""
    return sine_moment_stack(n_theta - 1, modes, length)


def theta_response_profile(xs, t: float, length: float, n_theta: int,
                           trunc: TruncationPolicy) -> np.ndarray:
    """Responses of u(x, t) to each initial-profile coefficient, for many x
    at one time.  Shape (len(xs), n_theta)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    modes = _theta_modes(n_theta, t, length, trunc)
    lam = (math.pi / length) * modes
    weights = _theta_weights(n_theta, modes, length) * np.exp(-lam * lam * t)
    return 2.0 / length * sin_modes(xs, length, modes) @ weights.T


def theta_response_history(x: float, ts, length: float, n_theta: int,
                           trunc: TruncationPolicy) -> np.ndarray:
    """Responses of u(x, t) to each initial-profile coefficient, at one x for
    many times.  Shape (len(ts), n_theta)."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if not np.all(ts > 0.0):
        raise DomainError("history times must be positive")
    modes = _theta_modes(n_theta, float(ts.min()), length, trunc)
    lam = (math.pi / length) * modes
    weights = _theta_weights(n_theta, modes, length)
    decay = np.exp(-np.multiply.outer(ts, lam * lam))
    sx = sin_modes(x, length, modes)
    return 2.0 / length * (decay * sx) @ weights.T


def _bump(x, length):
    # Closed form of (4/L) sum_odd sin(lam x)/lam^3; vanishes exactly at the ends.
    return x * (length - x) / 2.0


def _bump2(x, length):
    # Closed form of (4/L) sum_odd sin(lam x)/lam^5.
    return x * (length - x) * (length * length + length * x - x * x) / 24.0


def _phi_modes(n_phi: int, t_min: float, t_max: float, length: float,
               trunc: TruncationPolicy) -> np.ndarray:
    """Odd modes for the source-response series.

    The moment factors split per mode into an algebraic part (decaying only
    like powers of 1/lam) and an exponentially damped part.  The mode count
    covers the damped part at the earliest time and pushes the first
    *neglected* algebraic tail (1/lam^7 and beyond; the two slower tails get
    closed-form corrections) below trunc.tol at the latest time.
    """
    lam1 = math.pi / length
    # Damped part: |term| <= (4/L) (k-1)! exp(-lam^2 t) / lam^(2k+1).
    log_amp = max(
        math.log(4.0 / length) + math.lgamma(k) - (2 * k + 1) * math.log(lam1)
        for k in range(1, n_phi + 1)
    )
    n = mode_count(math.exp(min(log_amp, 700.0)), t_min, length, trunc)
    n = max(n, 31)
    c2 = max(
        ((k - 1) * (k - 2) * t_max ** (k - 3) for k in range(3, n_phi + 1)),
        default=0.0,
    )
    if c2 > 0.0:
        bound = trunc.tol / (4.0 * c2)
        tail_coef = (4.0 / length) * (length / math.pi) ** 7 / 12.0
        n = max(n, math.ceil((tail_coef / bound) ** (1.0 / 6.0)))
    if n > trunc.max_terms:
        warnings.warn(
            f"source-response series cut at {trunc.max_terms} modes before "
            f"the tail bound reached tol={trunc.tol:g}",
            TruncationWarning,
            stacklevel=3,
        )
        n = trunc.max_terms
    return np.arange(1, n + 1, 2, dtype=float)


def _phi_assemble(head: np.ndarray, ts, d0, d1, n_phi: int) -> np.ndarray:
    """head[:, k-1] + t^(k-1) d0 - (k-1) t^(k-2) d1 column by column."""
    ts = np.asarray(ts, dtype=float)
    out = np.array(head)
    t_pow = np.ones_like(ts)  # t^(k-2) for the current k
    for k in range(1, n_phi + 1):
        if k == 1:
            out[:, 0] += d0
        else:
            out[:, k - 1] += t_pow * (ts * d0 - (k - 1) * d1)
            t_pow = t_pow * ts
    return out


def phi_response_profile(xs, t: float, length: float, n_phi: int,
                         trunc: TruncationPolicy) -> np.ndarray:
    """Responses of u(x, t) to each source coefficient, for many x at one
    time.  Shape (len(xs), n_phi)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if not t > 0.0:
        raise DomainError(f"t must be positive, got {t}")
    modes = _phi_modes(n_phi, t, t, length, trunc)
    lam = (math.pi / length) * modes
    stack = exp_moment_stack(n_phi - 1, lam * lam, np.array([t]))[:, :, 0]
    sx = sin_modes(xs, length, modes)
    head = 4.0 / length * sx @ (stack / lam).T
    d0 = _bump(xs, length) - 4.0 / length * sx @ (1.0 / lam**3)
    d1 = _bump2(xs, length) - 4.0 / length * sx @ (1.0 / lam**5)
    return _phi_assemble(head, np.full(xs.shape, t), d0, d1, n_phi)


def phi_response_history(x: float, ts, length: float, n_phi: int,
                         trunc: TruncationPolicy) -> np.ndarray:
    """Responses of u(x, t) to each source coefficient, at one x for many
    times.  Shape (len(ts), n_phi)."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if not np.all(ts > 0.0):
        raise DomainError("history times must be positive")
    modes = _phi_modes(n_phi, float(ts.min()), float(ts.max()), length, trunc)
    lam = (math.pi / length) * modes
    stack = exp_moment_stack(n_phi - 1, lam * lam, ts)
    sx = sin_modes(x, length, modes)
    head = 4.0 / length * np.einsum("n,pnj->jp", sx / lam, stack)
    d0 = float(_bump(x, length) - 4.0 / length * np.dot(sx, 1.0 / lam**3))
    d1 = float(_bump2(x, length) - 4.0 / length * np.dot(sx, 1.0 / lam**5))
    return _phi_assemble(head, ts, d0, d1, n_phi)


# ---------------------------------------------------------------------------
# sensitivity tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SensitivityTables:
    """Parameter-independent response tables on the measurement mesh.

    Rows correspond to the mesh nodes from index 1 on.  ``final_*`` tables
    give the final-time profile response at x_i, ``sensor_*`` the interior
    history response at t_j; ``penalty_*`` are the plain monomial values
    entering the regularization sums.  Computed once per problem and shared
    read-only afterwards.
    """

    geom: Geometry
    mesh: MeasurementMesh
    n_x: int
    n_t: int
    trunc: TruncationPolicy
    final_theta: np.ndarray
    final_phi: np.ndarray
    sensor_theta: np.ndarray
    sensor_phi: np.ndarray
    penalty_x: np.ndarray
    penalty_t: np.ndarray

    def check_params(self, params: PolyParams) -> None:
        if params.n_x != self.n_x or params.n_t != self.n_t:
            raise ShapeMismatchError(
                f"params sized ({params.n_x}, {params.n_t}) do not match "
                f"tables sized ({self.n_x}, {self.n_t})"
            )

    def predict(self, params: PolyParams):
        """Model outputs (final profile at x_i, sensor history at t_j)."""
        self.check_params(params)
        u_final = self.final_theta @ params.theta + self.final_phi @ params.phi
        u_sensor = self.sensor_theta @ params.theta + self.sensor_phi @ params.phi
        return u_final, u_sensor


def sensitivity_tables(geom: Geometry, mesh: MeasurementMesh, n_x: int,
                       n_t: int,
                       trunc: TruncationPolicy = DEFAULT_TRUNCATION
                       ) -> SensitivityTables:
    """Build the four response tables and the penalty monomial tables."""
    if n_x < 1 or n_t < 1:
        raise ShapeMismatchError(f"n_x and n_t must be >= 1, got {n_x}, {n_t}")
    xs = mesh.x_interior
    ts = mesh.t_interior
    x_star = geom.sensor_shifted
    return SensitivityTables(
        geom=geom,
        mesh=mesh,
        n_x=n_x,
        n_t=n_t,
        trunc=trunc,
        final_theta=theta_response_profile(xs, geom.t_final, geom.length, n_x, trunc),
        final_phi=phi_response_profile(xs, geom.t_final, geom.length, n_t, trunc),
        sensor_theta=theta_response_history(x_star, ts, geom.length, n_x, trunc),
        sensor_phi=phi_response_history(x_star, ts, geom.length, n_t, trunc),
        penalty_x=npoly.polyvander(xs, n_x - 1),
        penalty_t=npoly.polyvander(ts, n_t - 1),
    )


# ---------------------------------------------------------------------------
# pointwise evaluation
# ---------------------------------------------------------------------------


def eval_u_final(params: PolyParams, x: float, geom: Geometry,
                 trunc: TruncationPolicy = DEFAULT_TRUNCATION) -> float:
    """Temperature at the final time at physical coordinate x."""
    if not geom.offset <= x <= geom.offset + geom.length:
        raise DomainError(
            f"x={x} outside [{geom.offset}, {geom.offset + geom.length}]"
        )
    x_shifted = x - geom.offset
    row_theta = theta_response_profile(
        [x_shifted], geom.t_final, geom.length, params.n_x, trunc)[0]
    row_phi = phi_response_profile(
        [x_shifted], geom.t_final, geom.length, params.n_t, trunc)[0]
    return float(row_theta @ params.theta + row_phi @ params.phi)


def eval_u_interior(params: PolyParams, t: float, geom: Geometry,
                    trunc: TruncationPolicy = DEFAULT_TRUNCATION) -> float:
    """Temperature at the interior sensor at time t in (0, t_f]."""
    if not 0.0 < t <= geom.t_final:
        raise DomainError(f"t={t} outside (0, {geom.t_final}]")
    x_star = geom.sensor_shifted
    row_theta = theta_response_history(
        x_star, [t], geom.length, params.n_x, trunc)[0]
    row_phi = phi_response_history(
        x_star, [t], geom.length, params.n_t, trunc)[0]
    return float(row_theta @ params.theta + row_phi @ params.phi)


def direction_response(direction: PolyParams, where: str, value: float,
                       geom: Geometry,
                       trunc: TruncationPolicy = DEFAULT_TRUNCATION) -> float:
    """Homogeneous response of the linear model to a single-block direction.

    ``where`` selects the observation: "final" evaluates the final-time
    profile at physical x = value, "sensor" the interior history at
    t = value.  Exactly one of the direction blocks may be nonzero; this is
    the perturbation response used by the exact line search, not the model
    output with the other block frozen at its current iterate.
    """
    phi_active = bool(np.any(direction.phi != 0.0))
    theta_active = bool(np.any(direction.theta != 0.0))
    if phi_active and theta_active:
        raise ContractViolationError(
            "direction must have at most one nonzero block"
        )
    if where == "final":
        return eval_u_final(direction, value, geom, trunc)
    if where == "sensor":
        return eval_u_interior(direction, value, geom, trunc)
    raise ValueError(f"where must be 'final' or 'sensor', got {where!r}")
