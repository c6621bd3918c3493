"""Lyapunov exponents along the random equilibrium.

Along a(theta_t omega) the linearized cocycle is
Phi(t, omega) = exp(int_0^t (beta - 3 a(theta_s omega)^2) ds), so every
finite-time rate (1/t) ln Phi is at most beta.  Per grid cell the integral
is taken exactly along the drift sub-flow of the split step, which keeps
that bound exact in floating point as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _io, _kernels
from .attractor import PullbackSettings, _collapse_or_raise, forward_stats, pullback_stream
from .errors import ParameterError
from .measures import EmpiricalMeasure
from .noise import FUTURE, CellStream, NoiseConfig
from .sde import ModelParams, Trajectory, log_linearized_flow


@dataclass(frozen=True)
class FtleSample:
    T: float
    value: float
    omega_id: int = 0


def finite_time_lyapunov(params: ModelParams, equilibrium: Trajectory, T: float,
                         omega_id: int = 0, quadrature: str = "exact") -> FtleSample:
    """(1/T) ln Phi(T) along an equilibrium trajectory that starts at time 0 of its grid."""
    if not T > 0:
        raise ParameterError(f"T={T!r} must be positive")
    g = equilibrium.grid
    idx = g.index_of(g.t_start + T)
    lg = log_linearized_flow(params, equilibrium, idx, quadrature)
    return FtleSample(T, lg / T, omega_id)


def _wald(p, n):
    return 1.96 * math.sqrt(p * (1 - p) / n)


@dataclass
class FtleEnsemble:
    T: float
    omega_id: np.ndarray
    values: np.ndarray
    sup_abs: np.ndarray  # running max of |a| over [0, T]

    @property
    def p_positive(self) -> float:
        return float(np.mean(self.values > 0))

    @property
    def ci(self) -> float:
        return _wald(self.p_positive, self.values.size)

    def samples(self) -> list[FtleSample]:
        return [FtleSample(self.T, float(v), int(i)) for i, v in zip(self.omega_id, self.values)]

    def to_csv(self, path):
        return _io.write_csv(path, ("omega_id", "T", "lambda"),
                             (self.omega_id, np.full(self.values.size, self.T), self.values))


def ftle_ensemble(params: ModelParams, noise_cfg: NoiseConfig, T: float, n_paths: int,
                  settings: PullbackSettings | None = None, threads=None) -> FtleEnsemble:
    if not T > 0:
        raise ParameterError(f"T={T!r} must be positive")
    fs = forward_stats(params, noise_cfg, n_paths, [T], settings, threads)
    return FtleEnsemble(T, fs.path_id, fs.log_flow[:, 0] / T, fs.sup_abs[:, 0])


def ftle_distribution(params: ModelParams, noise_cfg: NoiseConfig, T: float, n_paths: int,
                      settings: PullbackSettings | None = None, threads=None):
    """(distribution of lambda^{T,omega}, P(lambda > 0), 95% half-width)."""
    if n_paths < 1000:
        raise ParameterError("n_paths must be at least 1000")
    ens = ftle_ensemble(params, noise_cfg, T, n_paths, settings, threads)
    return EmpiricalMeasure(ens.values), ens.p_positive, ens.ci


@dataclass
class SpectrumReport:
    """Finite-time growth rates (1/T) ln Phi(T, omega), one row per omega."""

    T: np.ndarray
    rates: np.ndarray
    sup_abs: np.ndarray
    beta: float

    @property
    def n_paths(self) -> int:
        return self.rates.shape[0]

    @property
    def rate_min(self) -> np.ndarray:
        return self.rates.min(axis=0)

    @property
    def rate_max(self) -> np.ndarray:
        return self.rates.max(axis=0)

    def envelope(self, n: int):
        """(min, max) rates per T over the first ``n`` omegas (nested sample sets)."""
        if not 1 <= n <= self.n_paths:
            raise ParameterError(f"n={n} outside [1, {self.n_paths}]")
        r = self.rates[:n]
        return r.min(axis=0), r.max(axis=0)

    def max_rate_in_vicinity(self, eps: float, n: int | None = None) -> np.ndarray:
        """Max rate per T over omegas with |a| < eps on [0, T]; nan where none qualify."""
        n = self.n_paths if n is None else n
        r = np.where(self.sup_abs[:n] < eps, self.rates[:n], -np.inf)
        m = r.max(axis=0)
        return np.where(np.isfinite(m), m, np.nan)

    def to_csv(self, path, n: int | None = None):
        n = self.n_paths if n is None else n
        lo, hi = self.envelope(n)
        return _io.write_csv(path, ("T", "rate_min", "rate_max", "n_paths"),
                             (self.T, lo, hi, np.full(self.T.size, n)))


def dichotomy_spectrum_probe(params: ModelParams, noise_cfg: NoiseConfig, T_list,
                             n_paths: int, settings: PullbackSettings | None = None,
                             threads=None) -> SpectrumReport:
    T = np.asarray(T_list, dtype=float)
    if T.size == 0 or np.any(np.diff(T) <= 0) or T[0] <= 0:
        raise ParameterError("T_list must be nonempty, positive and increasing")
    fs = forward_stats(params, noise_cfg, n_paths, T, settings, threads)
    return SpectrumReport(T, fs.log_flow / T, fs.sup_abs, params.beta)


@dataclass
class AsymptoticEstimate:
    estimate: float
    stderr: float
    batch_means: np.ndarray
    burn_in: float
    T: float
    finite_time_only: bool

    def __iter__(self):
        return iter((self.estimate, self.stderr))

    def halves(self):
        """(estimate, stderr) over the first and second half of the batches."""
        b = self.batch_means
        h = b.size // 2
        out = []
        for part in (b[:h], b[h:]):
            out.append((float(part.mean()), float(part.std(ddof=1) / math.sqrt(part.size))))
        return out


def asymptotic_lyapunov(params: ModelParams, noise_cfg: NoiseConfig, T: float,
                        burn_in: float = 10.0, n_batches: int = 20, path_id: int = 0,
                        settings: PullbackSettings | None = None) -> AsymptoticEstimate:
    """Time average of beta - 3 a^2 over [burn_in, T] along one equilibrium path.

    The standard error comes from ``n_batches`` equal batch means.  In
    non-truncated mode the result is flagged as a finite-time average only.
    The linear surrogate (cubic=False) needs no equilibrium since its
    integrand is the constant beta.
    """
    settings = settings or PullbackSettings()
    dt = settings.dt
    if not T > burn_in >= 0:
        raise ParameterError("need T > burn_in >= 0")
    if n_batches < 2:
        raise ParameterError("n_batches must be at least 2")
    n_burn = int(round(burn_in / dt))
    n_tot = int(round(T / dt))
    m = (n_tot - n_burn) // n_batches
    if m < 1:
        raise ParameterError("averaging window too short for the batch count")
    if params.cubic:
        pb = pullback_stream(params, noise_cfg, path_id, settings)
        _collapse_or_raise(pb, True)
        a = pb.equilibrium_estimate
    else:
        a = 0.0
    e1, k = params.flow_constants(dt)
    stream = CellStream(noise_cfg, dt, path_id, FUTURE)
    dl = stream.take(n_burn + m * n_batches)
    inc = np.empty(dl.size)
    _kernels.cocycle_increments(a, params.sigma, dl, e1, k, params.beta * dt, inc)
    batches = inc[n_burn:].reshape(n_batches, m).sum(axis=1) / (m * dt)
    est = float(batches.mean())
    se = float(batches.std(ddof=1) / math.sqrt(n_batches))
    return AsymptoticEstimate(est, se, batches, burn_in, n_burn * dt + m * n_batches * dt,
                              not noise_cfg.truncated)
