"""Pathwise integration of dX = (beta X - X^3) dt + sigma dL.

The default scheme splits each grid cell into the exact flow of the drift
followed by the cell's noise increment.  The drift flow has the closed form
x e^{beta h} / sqrt(1 + k x^2), so the step is strictly increasing in x,
contracts pairs by at most e^{beta h}, keeps 0 and +-sqrt(beta) fixed and
cannot overflow however large a jump is.  The tamed explicit Euler step
x + h b(x) / (1 + h |b(x)|) is available as ``scheme="tamed"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _io, _kernels
from .errors import OutOfWindowError, ParameterError
from .noise import NoisePath, TimeGrid

SCHEMES = ("split", "tamed")


def drift(beta, x):
    """b(x) = beta x - x^3."""
    return beta * x - x ** 3


def equilibria(beta: float) -> tuple[float, ...]:
    """Deterministic equilibria: 0, plus +-sqrt(beta) when beta > 0."""
    if beta > 0:
        r = math.sqrt(beta)
        return (-r, 0.0, r)
    return (0.0,)


@dataclass(frozen=True)
class ModelParams:
    beta: float
    sigma: float
    cubic: bool = True  # False keeps only the linear part beta*x

    def __post_init__(self):
        if not math.isfinite(self.beta):
            raise ParameterError(f"beta={self.beta!r} must be finite")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ParameterError(f"sigma={self.sigma!r} must be finite and >= 0")

    def flow_constants(self, h: float):
        return _kernels.flow_constants(self.beta, h, self.cubic)


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TimeGrid
    states: np.ndarray
    params: ModelParams

    def __post_init__(self):
        if len(self.states) != self.grid.n_steps + 1:
            raise ParameterError("states length must be n_steps + 1")

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def to_csv(self, path):
        return _io.write_csv(path, ("t", "x"), (self.times, self.states))


def _check_x0(x0):
    if not math.isfinite(x0):
        raise ParameterError(f"x0={x0!r} must be finite")


def _check_sigma(params: ModelParams, noise: NoisePath):
    if params.sigma != noise.config.sigma:
        raise ParameterError(
            f"model sigma {params.sigma} differs from noise sigma {noise.config.sigma}")


def _run(params, grid, sigma_dl_raw, x0, scheme):
    if scheme not in SCHEMES:
        raise ParameterError(f"scheme={scheme!r} must be one of {SCHEMES}")
    h = grid.dt
    e1, k = params.flow_constants(h)
    return _kernels.integrate_states(
        float(x0), params.sigma, np.ascontiguousarray(sigma_dl_raw, dtype=float),
        scheme == "tamed", e1, k, params.beta, h, 1.0 if params.cubic else 0.0)


def integrate(params: ModelParams, noise: NoisePath, x0: float,
              scheme: str = "split") -> Trajectory:
    """Solve the SDE on the noise grid starting from ``x0`` at the grid start."""
    _check_x0(x0)
    _check_sigma(params, noise)
    states = _run(params, noise.grid, noise.levy_increments, x0, scheme)
    return Trajectory(noise.grid, states, params)


def log_linearized_flow(params: ModelParams, equilibrium: Trajectory,
                        t_index: int, quadrature: str = "exact") -> float:
    """ln Phi(t) = integral over [t_0, t] of (beta - 3 a(s)^2) ds along the trajectory.

    ``quadrature="exact"`` integrates a(s)^2 exactly along the drift
    sub-flow of each cell, which is the derivative of the split step and is
    never above beta*h per cell.  ``"trapezoid"`` uses the node values.
    """
    n = equilibrium.grid.n_steps
    if int(t_index) != t_index or not 0 <= t_index <= n:
        raise OutOfWindowError(f"t_index={t_index} outside [0, {n}]")
    t_index = int(t_index)
    if t_index == 0:
        return 0.0
    h = equilibrium.grid.dt
    a = equilibrium.states
    if quadrature == "exact":
        _, k = params.flow_constants(h)
        return _kernels.trajectory_log_cocycle(a, t_index, params.beta * h, k)
    if quadrature == "trapezoid":
        c = 3.0 if params.cubic else 0.0
        f = params.beta - c * a[: t_index + 1] ** 2
        return float(h * (f.sum() - 0.5 * (f[0] + f[-1])))
    raise ParameterError(f"quadrature={quadrature!r} must be 'exact' or 'trapezoid'")


def linearized_flow(params: ModelParams, equilibrium: Trajectory, t_index: int,
                    quadrature: str = "exact") -> float:
    """Phi(t) = exp of the integral of (beta - 3 a^2) along ``equilibrium``."""
    return math.exp(log_linearized_flow(params, equilibrium, t_index, quadrature))


def _forcing_nodes(g, grid: TimeGrid) -> np.ndarray:
    if callable(g):
        vals = np.array([g(t) for t in grid.times], dtype=float)
    else:
        vals = np.asarray(g, dtype=float)
    if vals.shape != (grid.n_steps + 1,):
        raise ParameterError("forcing must give one value per grid node")
    return vals


def forced_ode_gap(params: ModelParams, noise: NoisePath,
                   g: np.ndarray | Callable[[float], float], x0: float,
                   y0: float | None = None) -> float:
    """sup over nodes of |X_t - x_t|.

    X is driven by the noise and x by the deterministic forcing g, both
    through sigma * (increments of their driving signal), so X starts at
    ``x0`` and x at ``y0`` (default ``x0``).  Both are built from node
    values so identical inputs give identical paths.
    """
    _check_x0(x0)
    y0 = x0 if y0 is None else y0
    _check_x0(y0)
    _check_sigma(params, noise)
    gv = _forcing_nodes(g, noise.grid)
    X = _run(params, noise.grid, np.diff(noise.values), x0, "split")
    x = _run(params, noise.grid, np.diff(gv), y0, "split")
    return float(np.max(np.abs(X - x)))


def compare_to_forced_ode(params: ModelParams, noise: NoisePath, g, x0: float,
                          delta: float, y0: float | None = None) -> bool:
    """True when the noisy and forced solutions stay within ``delta`` on the grid."""
    return forced_ode_gap(params, noise, g, x0, y0) <= delta


def comparison_epsilon(beta: float, sigma: float, T: float, delta: float) -> float:
    """Forcing tolerance delta e^{-|beta| T} / (1 + sigma) that keeps solutions delta-close."""
    return delta * math.exp(-abs(beta) * T) / (1 + sigma)
