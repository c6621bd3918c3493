"""Pullback random attractor, random equilibrium and tube events around 0.

The split step is strictly increasing, so the images of the endpoints of
an interval bracket the image of everything inside it.  Pulling the
interval [-10, 10] back from time -T to 0 therefore brackets the random
equilibrium a(omega); once the bracket is narrower than ``tol`` its
midpoint is a sample of a(omega).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _io, _kernels
from .errors import CollapseError, OutOfWindowError, ParameterError
from .measures import EmpiricalMeasure
from .noise import FUTURE, PAST, CellStream, NoiseConfig, NoisePath
from .parallel import map_ordered
from .sde import ModelParams, _check_sigma

DEFAULT_INTERVAL = (-10.0, 10.0)
DEFAULT_TOL = 1e-8
DEFAULT_T = 50.0
T_CAP = 800.0


@dataclass(frozen=True)
class PullbackResult:
    pullback_horizon: float
    endpoints_at_zero: tuple[float, float]
    diameter: float
    equilibrium_estimate: float
    tol: float = DEFAULT_TOL

    @property
    def collapsed(self) -> bool:
        return self.diameter < self.tol


def _check_interval(interval):
    lo, hi = map(float, interval)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ParameterError(f"initial interval {interval!r} must satisfy lo < hi")
    return lo, hi


def _result(T, lo, hi, tol):
    return PullbackResult(T, (lo, hi), abs(hi - lo), 0.5 * (lo + hi), tol)


def pullback_attractor(params: ModelParams, noise: NoisePath, T: float,
                       initial_interval=DEFAULT_INTERVAL,
                       tol: float = DEFAULT_TOL) -> PullbackResult:
    """Pull ``initial_interval`` back from time -T to 0 through the noise window."""
    _check_sigma(params, noise)
    lo, hi = _check_interval(initial_interval)
    if not T > 0:
        raise ParameterError(f"T={T!r} must be positive")
    g = noise.grid
    if g.t_start > -T + 1e-9 * g.dt or g.t_end < -1e-9 * g.dt:
        raise OutOfWindowError(f"noise window [{g.t_start}, {g.t_end}] does not cover [{-T}, 0]")
    i0, i1 = g.index_of(-T), g.index_of(0.0)
    e1, k = params.flow_constants(g.dt)
    past = np.ascontiguousarray(noise.levy_increments[i0:i1][::-1])
    lo, hi = _kernels.pullback_pair(lo, hi, params.sigma, past, i1 - i0, e1, k)
    return _result(T, lo, hi, tol)


@dataclass(frozen=True)
class PullbackSettings:
    """Pullback horizon policy for stream-driven ensembles."""

    T: float = DEFAULT_T
    tol: float = DEFAULT_TOL
    T_max: float = T_CAP
    interval: tuple[float, float] = DEFAULT_INTERVAL
    dt: float = 1e-3

    def __post_init__(self):
        _check_interval(self.interval)
        if not (0 < self.T <= self.T_max):
            raise ParameterError("need 0 < T <= T_max")
        if not (self.tol > 0 and self.dt > 0):
            raise ParameterError("tol and dt must be positive")


def pullback_stream(params: ModelParams, cfg: NoiseConfig, path_id: int,
                    settings: PullbackSettings = PullbackSettings()) -> PullbackResult:
    """Pullback on omega_{path_id}, doubling the horizon until collapse or T_max.

    The past increments are shared across horizons, so a longer horizon only
    prepends earlier noise to the same realization.
    """
    dt = settings.dt
    e1, k = params.flow_constants(dt)
    past = CellStream(cfg, dt, path_id, PAST)
    T = settings.T
    while True:
        n = int(round(T / dt))
        lo, hi = _kernels.pullback_pair(*settings.interval, params.sigma,
                                        past.take(n), n, e1, k)
        if abs(hi - lo) < settings.tol or T >= settings.T_max:
            return _result(T, lo, hi, settings.tol)
        T = min(2 * T, settings.T_max)


@dataclass
class EnsembleResult:
    path_id: np.ndarray
    equilibrium: np.ndarray
    diameter: np.ndarray
    horizon: np.ndarray
    tol: float

    @property
    def collapsed(self) -> np.ndarray:
        return self.diameter < self.tol

    @property
    def failed(self) -> np.ndarray:
        return self.path_id[~self.collapsed]

    def measure(self) -> EmpiricalMeasure:
        return EmpiricalMeasure(self.equilibrium)

    def to_csv(self, path):
        return _io.write_csv(path, ("path_id", "equilibrium", "diameter", "collapsed"),
                             (self.path_id, self.equilibrium, self.diameter,
                              self.collapsed))


def _settings(settings, **kw):
    if settings is None:
        settings = PullbackSettings(**{k: v for k, v in kw.items() if v is not None})
    return settings


def equilibrium_records(params: ModelParams, noise_cfg: NoiseConfig, n_paths: int,
                        settings: PullbackSettings | None = None, threads=None,
                        first_path: int = 0) -> EnsembleResult:
    """Pullback runs on omega_i for i in [first_path, first_path + n_paths)."""
    settings = _settings(settings)
    ids = np.arange(first_path, first_path + n_paths)
    res = map_ordered(lambda i: pullback_stream(params, noise_cfg, int(i), settings),
                      ids, threads)
    return EnsembleResult(ids, np.array([r.equilibrium_estimate for r in res]),
                          np.array([r.diameter for r in res]),
                          np.array([r.pullback_horizon for r in res]), settings.tol)


def equilibrium_ensemble(params: ModelParams, noise_cfg: NoiseConfig,
                         T: float = DEFAULT_T, n_paths: int = 1000,
                         settings: PullbackSettings | None = None,
                         threads=None) -> EmpiricalMeasure:
    """Samples of a(omega) over independent omega; raises if any run fails to collapse."""
    if n_paths < 1000:
        raise ParameterError("n_paths must be at least 1000")
    settings = settings or PullbackSettings(T=T)
    rec = equilibrium_records(params, noise_cfg, n_paths, settings, threads)
    if rec.failed.size:
        raise CollapseError(f"{rec.failed.size} of {n_paths} runs did not collapse "
                            f"by T={settings.T_max}", rec.failed)
    return rec.measure()


@dataclass
class ForwardStats:
    """Random equilibrium followed forward from time 0 on each omega.

    Arrays are indexed [path, checkpoint]: ``a`` is a(theta_t omega),
    ``log_flow`` is ln Phi(t, omega) and ``sup_abs`` is the running max of
    |a| over grid nodes in [0, t].
    """

    t: np.ndarray
    a: np.ndarray
    log_flow: np.ndarray
    sup_abs: np.ndarray
    pullback: EnsembleResult
    path_id: np.ndarray = field(default=None)


def _checkpoint_nodes(t, dt):
    t = np.asarray(t, dtype=float)
    nodes = np.rint(t / dt).astype(np.int64)
    if np.any(np.abs(nodes * dt - t) > 1e-6 * dt) or np.any(np.diff(nodes) < 0):
        raise ParameterError("checkpoints must be sorted multiples of dt")
    return t, nodes


def _collapse_or_raise(pb, strict):
    if strict and not pb.collapsed:
        raise CollapseError("pullback did not collapse; the equilibrium is undefined")


def forward_stats(params: ModelParams, noise_cfg: NoiseConfig, n_paths: int,
                  t_checkpoints, settings: PullbackSettings | None = None,
                  threads=None, first_path: int = 0, strict: bool = True) -> ForwardStats:
    settings = _settings(settings)
    dt = settings.dt
    t, nodes = _checkpoint_nodes(t_checkpoints, dt)
    n = int(nodes[-1])
    e1, k = params.flow_constants(dt)
    beta_h = params.beta * dt
    ids = np.arange(first_path, first_path + n_paths)

    def one(i):
        pb = pullback_stream(params, noise_cfg, int(i), settings)
        _collapse_or_raise(pb, strict)
        dl = CellStream(noise_cfg, dt, int(i), FUTURE).take(n)
        a, lg, mx = _kernels.forward_stats(pb.equilibrium_estimate, params.sigma,
                                           dl, n, nodes, e1, k, beta_h)
        return pb, a, lg, mx

    res = map_ordered(one, ids, threads)
    pbs = [r[0] for r in res]
    ens = EnsembleResult(ids, np.array([p.equilibrium_estimate for p in pbs]),
                         np.array([p.diameter for p in pbs]),
                         np.array([p.pullback_horizon for p in pbs]), settings.tol)
    return ForwardStats(t, np.array([r[1] for r in res]), np.array([r[2] for r in res]),
                        np.array([r[3] for r in res]), ens, ids)


def forward_pairs(params: ModelParams, noise_cfg: NoiseConfig, x0, t_checkpoints,
                  dt: float = 1e-3, threads=None, pullback_kw=None, strict=True):
    """States of x_i(t) and a(theta_t omega_i) at the checkpoints.

    Path i starts at x0[i] at time 0 on omega_i; the partner is the random
    equilibrium on the same omega.  Returns two arrays of shape
    (len(x0), len(t_checkpoints)).
    """
    settings = PullbackSettings(dt=dt, **(pullback_kw or {}))
    t, nodes = _checkpoint_nodes(t_checkpoints, dt)
    n = int(nodes[-1])
    e1, k = params.flow_constants(dt)
    x0 = np.asarray(x0, dtype=float)

    def one(i):
        pb = pullback_stream(params, noise_cfg, int(i), settings)
        _collapse_or_raise(pb, strict)
        dl = CellStream(noise_cfg, dt, int(i), FUTURE).take(n)
        xs, as_, _ = _kernels.forward_pair(float(x0[i]), pb.equilibrium_estimate,
                                           params.sigma, dl, n, nodes, n + 1, e1, k)
        return xs, as_

    res = map_ordered(one, range(x0.size), threads)
    return np.array([r[0] for r in res]), np.array([r[1] for r in res])


def vicinity_table(params: ModelParams, noise_cfg: NoiseConfig, eps_list, T_list,
                   n_paths: int, settings: PullbackSettings | None = None,
                   threads=None):
    """P(|a(theta_s omega)| < eps for all grid s in [0, T]) on an (eps, T) grid.

    Returns (estimate, ci_halfwidth) arrays of shape (len(eps_list), len(T_list)),
    estimated from one set of paths.
    """
    fs = forward_stats(params, noise_cfg, n_paths, sorted(T_list), settings, threads)
    order = np.argsort(np.asarray(T_list, dtype=float), kind="stable")
    sup = np.empty_like(fs.sup_abs)
    sup[:, order] = fs.sup_abs
    eps = np.asarray(eps_list, dtype=float)
    est = (sup[None, :, :] < eps[:, None, None]).mean(axis=1)
    ci = 1.96 * np.sqrt(est * (1 - est) / n_paths)
    return est, ci


def vicinity_probability(params: ModelParams, noise_cfg: NoiseConfig, epsilon: float,
                         T: float, n_paths: int,
                         settings: PullbackSettings | None = None, threads=None):
    """Estimate of P(a(theta_s omega) in (-eps, eps) for all s in [0, T]) and its 95% half-width."""
    if not (epsilon > 0 and T > 0):
        raise ParameterError("epsilon and T must be positive")
    est, ci = vicinity_table(params, noise_cfg, [epsilon], [T], n_paths, settings, threads)
    return float(est[0, 0]), float(ci[0, 0])


def max_offset_gap(params: ModelParams, noise_cfg: NoiseConfig, delta: float,
                   T: float, n_paths: int, t_from: float = 1.0,
                   settings: PullbackSettings | None = None, threads=None) -> np.ndarray:
    """Per-omega max over grid t in [t_from, T] of |phi(t, omega, a + delta) - a(theta_t omega)|.

    A large value on some omega shows that attraction to a(omega) is not
    uniform over omega.
    """
    settings = _settings(settings)
    dt = settings.dt
    n = int(round(T / dt))
    start = int(round(t_from / dt))
    e1, k = params.flow_constants(dt)
    nodes = np.array([n], dtype=np.int64)

    def one(i):
        pb = pullback_stream(params, noise_cfg, int(i), settings)
        _collapse_or_raise(pb, True)
        dl = CellStream(noise_cfg, dt, int(i), FUTURE).take(n)
        a0 = pb.equilibrium_estimate
        return _kernels.forward_pair(a0 + delta, a0, params.sigma, dl, n, nodes,
                                     start, e1, k)[2]

    return np.array(map_ordered(one, range(n_paths), threads))
