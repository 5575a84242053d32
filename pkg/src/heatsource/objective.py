"""Regularized data-misfit objective over the polynomial coefficients, its
analytic gradient, and a direct dense least-squares reference solver.

The objective is the sum of squared misfits at the final-time profile nodes
and at the sensor-history nodes, plus alpha times the squared sampled values
of the two reconstructed polynomials at the same nodes.  Because the forward
model is linear in the coefficients, the objective is a convex quadratic and
its exact minimizer is available by a direct solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError, SingularSystemError
from .model import PolyParams, SensitivityTables

__all__ = [
    "Measurements",
    "ObjectiveConfig",
    "cost",
    "gradient",
    "ridge_solve",
]


@dataclass
class Measurements:
    """Sampled data: final-time profile u_f at x_1..x_I and interior history
    u_star at t_1..t_I (node 0 excluded on both meshes)."""

    u_f: np.ndarray
    u_star: np.ndarray

    def __post_init__(self):
        self.u_f = np.atleast_1d(np.asarray(self.u_f, dtype=float))
        self.u_star = np.atleast_1d(np.asarray(self.u_star, dtype=float))
        if not (np.all(np.isfinite(self.u_f)) and np.all(np.isfinite(self.u_star))):
            raise ValueError("measurements must be finite")

    def check_against(self, tables: SensitivityTables) -> None:
        if self.u_f.size != tables.final_theta.shape[0]:
            raise ShapeMismatchError(
                f"u_f has {self.u_f.size} samples, mesh provides "
                f"{tables.final_theta.shape[0]} final-time nodes"
            )
        if self.u_star.size != tables.sensor_theta.shape[0]:
            raise ShapeMismatchError(
                f"u_star has {self.u_star.size} samples, mesh provides "
                f"{tables.sensor_theta.shape[0]} history nodes"
            )


@dataclass(frozen=True)
class ObjectiveConfig:
    """Regularization weight.  alpha = 0 is allowed (unregularized mode,
    used by the exactness-oriented tests)."""

    alpha: float = 1e-6

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


def residuals(params: PolyParams, meas: Measurements,
              tables: SensitivityTables):
    """Data-minus-model residuals (final profile, sensor history)."""
    meas.check_against(tables)
    u_final, u_sensor = tables.predict(params)
    return meas.u_f - u_final, meas.u_star - u_sensor


def cost(params: PolyParams, meas: Measurements, cfg: ObjectiveConfig,
         tables: SensitivityTables) -> float:
    """Value of the regularized objective at the given coefficients."""
    r_f, r_s = residuals(params, meas, tables)
    pen_x = tables.penalty_x @ params.theta
    pen_t = tables.penalty_t @ params.phi
    return float(
        r_f @ r_f + r_s @ r_s + cfg.alpha * (pen_x @ pen_x + pen_t @ pen_t)
    )


def gradient(params: PolyParams, meas: Measurements, cfg: ObjectiveConfig,
             tables: SensitivityTables):
    """Analytic gradient blocks (d/d phi, d/d theta)."""
    r_f, r_s = residuals(params, meas, tables)
    pen_x = tables.penalty_x @ params.theta
    pen_t = tables.penalty_t @ params.phi
    g_phi = -2.0 * (tables.final_phi.T @ r_f + tables.sensor_phi.T @ r_s) \
        + 2.0 * cfg.alpha * (tables.penalty_t.T @ pen_t)
    g_theta = -2.0 * (tables.final_theta.T @ r_f + tables.sensor_theta.T @ r_s) \
        + 2.0 * cfg.alpha * (tables.penalty_x.T @ pen_x)
    return g_phi, g_theta


def ridge_solve(meas: Measurements, cfg: ObjectiveConfig,
                tables: SensitivityTables) -> PolyParams:
    """Exact global minimizer of the objective by a dense least-squares
    solve of the stacked system [design; sqrt(alpha) * penalty].

    Stacking instead of forming the normal matrix keeps the conditioning of
    the design rather than its square.  Raises SingularSystemError when
    alpha = 0 and the design is rank deficient.
    """
    meas.check_against(tables)
    n_x, n_t = tables.n_x, tables.n_t
    design = np.block([
        [tables.final_theta, tables.final_phi],
        [tables.sensor_theta, tables.sensor_phi],
    ])
    root_alpha = np.sqrt(cfg.alpha)
    pen = np.zeros((tables.penalty_x.shape[0] + tables.penalty_t.shape[0],
                    n_x + n_t))
    pen[: tables.penalty_x.shape[0], :n_x] = root_alpha * tables.penalty_x
    pen[tables.penalty_x.shape[0]:, n_x:] = root_alpha * tables.penalty_t
    stacked = np.vstack([design, pen])
    rhs = np.concatenate([meas.u_f, meas.u_star, np.zeros(pen.shape[0])])
    solution, _, rank, _ = np.linalg.lstsq(stacked, rhs, rcond=None)
    if cfg.alpha == 0.0 and rank < n_x + n_t:
        raise SingularSystemError(
            f"unregularized design is rank deficient (rank {rank} of "
            f"{n_x + n_t}); use alpha > 0"
        )
    return PolyParams(phi=solution[n_x:], theta=solution[:n_x])
