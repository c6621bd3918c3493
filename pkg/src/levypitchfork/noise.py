"""Symmetric alpha-stable and truncated Levy noise.

Increments are normalized so that E exp(i u L_t) = exp(-t |u|^alpha), which
corresponds to the generator -(-Delta)^{alpha/2} and the Levy measure
nu(dz) = c_alpha |z|^{-1-alpha} dz.

Reproducibility rests on counter-based substreams: the increments of path
``path_id`` are a pure function of (seed, path_id, dt).  Cells with
non-negative index come from one Philox stream, cells with negative index
from another, generated backward from time 0, so extending a window in
either direction never changes increments already seen.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from . import _io
from .errors import EmptyPathError, OutOfWindowError, ParameterError

BLOCK = 4096
FUTURE, PAST, AUX = 0, 1, 2
_U64 = 2**64


class NoiseMode(str, enum.Enum):
    NONTRUNCATED = "nontruncated"
    TRUNCATED = "truncated"


def c_alpha(alpha: float) -> float:
    """Constant of the Levy measure nu(dz) = c_alpha |z|^{-1-alpha} dz."""
    return (alpha * gamma((1 + alpha) / 2)
            / (2 ** (1 - alpha) * math.sqrt(math.pi) * gamma(1 - alpha / 2)))


def truncated_second_moment(alpha: float) -> float:
    """Integral of z^2 nu(dz) over |z| < 1, i.e. Var(L_1) in truncated mode."""
    return 2 * c_alpha(alpha) / (2 - alpha)


def band_rate(alpha: float, eps: float) -> float:
    """Total mass of nu on eps <= |z| < 1."""
    return 2 * c_alpha(alpha) * (eps ** -alpha - 1) / alpha


def small_jump_variance(alpha: float, eps: float) -> float:
    """Integral of z^2 nu(dz) over |z| < eps."""
    return 2 * c_alpha(alpha) * eps ** (2 - alpha) / (2 - alpha)


def _check_alpha(alpha, name="alpha"):
    if not (isinstance(alpha, (int, float, np.floating)) and 1 < alpha < 2):
        raise ParameterError(f"{name}={alpha!r} must lie in the open interval (1, 2)")


@dataclass(frozen=True)
class NoiseConfig:
    alpha: float = 1.5
    sigma: float = 0.5
    mode: NoiseMode = NoiseMode.NONTRUNCATED
    small_jump_cutoff: float = 0.01
    seed: int = 0

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ParameterError(f"sigma={self.sigma!r} must be finite and >= 0")
        try:
            object.__setattr__(self, "mode", NoiseMode(self.mode))
        except ValueError:
            raise ParameterError(
                f"mode={self.mode!r} must be one of "
                f"{[m.value for m in NoiseMode]}") from None
        if not 0 < self.small_jump_cutoff < 1:
            raise ParameterError(
                f"small_jump_cutoff={self.small_jump_cutoff!r} must lie in (0, 1)")
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < _U64):
            raise ParameterError(f"seed={self.seed!r} must be an unsigned 64-bit integer")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def truncated(self) -> bool:
        return self.mode is NoiseMode.TRUNCATED


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_steps: int
    dt: float = field(init=False)

    def __post_init__(self):
        if self.n_steps == 0:
            raise EmptyPathError("time grid needs at least one step")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ParameterError(f"n_steps={self.n_steps!r} must be a positive integer")
        if not self.t_end > self.t_start:
            raise ParameterError("t_end must exceed t_start")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "dt", (self.t_end - self.t_start) / self.n_steps)

    @classmethod
    def from_dt(cls, t_start: float, t_end: float, dt: float) -> "TimeGrid":
        """Grid of step ``dt`` whose end is the nearest lattice point to t_end."""
        if not dt > 0:
            raise ParameterError(f"dt={dt!r} must be positive")
        n = int(round((t_end - t_start) / dt))
        if n <= 0:
            raise EmptyPathError("time grid needs at least one step")
        return cls(t_start, t_start + n * dt, n)

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    def index_of(self, t: float) -> int:
        """Node index of time ``t``; raises if ``t`` is not a node."""
        x = (t - self.t_start) / self.dt
        i = int(round(x))
        if abs(x - i) > 1e-6 or not 0 <= i <= self.n_steps:
            raise OutOfWindowError(f"time {t} is not a node of {self}")
        return i

    def lattice_offset(self) -> int:
        """Index j0 with t_start = j0*dt; raises if the grid is off-lattice."""
        x = self.t_start / self.dt
        j0 = int(round(x))
        if abs(x - j0) > 1e-6:
            raise ParameterError("grid start is not a multiple of dt")
        return j0


@dataclass(frozen=True, eq=False)
class NoisePath:
    """A window of one realization of L on a grid.

    ``levy_increments`` holds the raw increments of L; ``increments`` returns
    them scaled by sigma, which is what the SDE consumes.
    """

    grid: TimeGrid
    levy_increments: np.ndarray
    config: NoiseConfig
    max_jump: float | None = None

    def __post_init__(self):
        inc = np.asarray(self.levy_increments, dtype=float)
        if inc.shape != (self.grid.n_steps,):
            raise ParameterError("increments length must equal grid.n_steps")
        inc.setflags(write=False)
        object.__setattr__(self, "levy_increments", inc)

    @property
    def increments(self) -> np.ndarray:
        return self.config.sigma * self.levy_increments

    @property
    def values(self) -> np.ndarray:
        """Raw L at the grid nodes, anchored to 0 at the grid start."""
        return np.concatenate(([0.0], np.cumsum(self.levy_increments)))

    def to_csv(self, path):
        return _io.write_csv(path, ("t", "dL"),
                             (self.grid.times[:-1], self.levy_increments))


def _cms(rng: np.random.Generator, alpha: float, size):
    # Chambers-Mallows-Stuck; with this form the draw already has
    # characteristic function exp(-|u|^alpha)
    u = rng.uniform(-math.pi / 2, math.pi / 2, size)
    w = rng.standard_exponential(size)
    return (np.sin(alpha * u) / np.cos(u) ** (1 / alpha)
            * (np.cos(u - alpha * u) / w) ** ((1 - alpha) / alpha))


def sample_stable_increment(alpha: float, dt: float, rng: np.random.Generator,
                            size=None):
    """Draw L_{t+dt} - L_t for the symmetric alpha-stable process.

    Returns a float when ``size`` is None, otherwise an array.
    """
    _check_alpha(alpha)
    if not dt >= 0:
        raise ParameterError(f"dt={dt!r} must be >= 0")
    if dt == 0:
        return 0.0 if size is None else np.zeros(size)
    x = dt ** (1 / alpha) * _cms(rng, alpha, size)
    return float(x) if size is None else x


def _truncated_block(rng, alpha, eps, dt, size, track):
    """Compound Poisson on [eps, 1) plus a Gaussian for the smaller jumps."""
    out = rng.standard_normal(size) * math.sqrt(dt * small_jump_variance(alpha, eps))
    counts = rng.poisson(band_rate(alpha, eps) * dt, size)
    total = int(counts.sum())
    a = eps ** -alpha
    mags = (a - rng.random(total) * (a - 1)) ** (-1 / alpha)
    np.minimum(mags, np.nextafter(1.0, 0.0), out=mags)
    signs = np.where(rng.random(total) < 0.5, -1.0, 1.0)
    cell = np.repeat(np.arange(size), counts)
    out += np.bincount(cell, weights=signs * mags, minlength=size)
    maxj = None
    if track:
        maxj = np.zeros(size)
        np.maximum.at(maxj, cell, mags)
    return out, maxj


def substream(seed: int, path_id: int, direction: int) -> np.random.Generator:
    """Independent generator for one (path, direction) pair."""
    ss = np.random.SeedSequence(seed, spawn_key=(int(path_id), int(direction)))
    return np.random.Generator(np.random.Philox(ss))


class CellStream:
    """Raw increments of one path in one time direction, generated in blocks.

    Cell i of the future stream covers [i dt, (i+1) dt]; cell i of the past
    stream covers [-(i+1) dt, -i dt].
    """

    def __init__(self, config: NoiseConfig, dt: float, path_id: int,
                 direction: int, track_jumps: bool = False):
        self.config = config
        self.dt = dt
        self.track = track_jumps and config.truncated
        self._rng = substream(config.seed, path_id, direction)
        self._blocks: list[np.ndarray] = []
        self._jumps: list[np.ndarray] = []
        self._cache = np.empty(0)

    def _grow(self):
        cfg = self.config
        if cfg.truncated:
            blk, mj = _truncated_block(self._rng, cfg.alpha, cfg.small_jump_cutoff,
                                       self.dt, BLOCK, self.track)
            if self.track:
                self._jumps.append(mj)
        else:
            blk = self.dt ** (1 / cfg.alpha) * _cms(self._rng, cfg.alpha, BLOCK)
        self._blocks.append(blk)

    def take(self, n: int) -> np.ndarray:
        """First ``n`` cells as a contiguous array."""
        while len(self._blocks) * BLOCK < n:
            self._grow()
        if self._cache.shape[0] < n:
            self._cache = np.concatenate(self._blocks)
        return self._cache[:n]

    def max_jump(self, n: int) -> float:
        if not self.track:
            raise ValueError("jump tracking is off for this stream")
        self.take(n)
        return float(np.concatenate(self._jumps)[:n].max(initial=0.0))


def sample_path(config: NoiseConfig, grid: TimeGrid,
                rng: np.random.Generator | None = None, path_id: int = 0,
                track_jumps: bool = False) -> NoisePath:
    """Sample the noise on ``grid``.

    With ``rng`` given the increments are drawn from it in order.  Otherwise
    they come from the substreams of (config.seed, path_id), which requires
    a grid aligned with the dt lattice; two grids with the same dt then see
    the same realization on their overlap.
    """
    n, dt = grid.n_steps, grid.dt
    cfg = config
    max_jump = None
    if rng is not None:
        if cfg.truncated:
            inc, mj = _truncated_block(rng, cfg.alpha, cfg.small_jump_cutoff,
                                       dt, n, track_jumps)
            if track_jumps:
                max_jump = float(mj.max(initial=0.0))
        else:
            inc = dt ** (1 / cfg.alpha) * _cms(rng, cfg.alpha, n)
        return NoisePath(grid, inc, cfg, max_jump)

    j0 = grid.lattice_offset()
    j1 = j0 + n
    parts, jumps = [], []
    if j0 < 0:
        past = CellStream(cfg, dt, path_id, PAST, track_jumps)
        m = -j0
        parts.append(past.take(m)[::-1][: min(j1, 0) - j0])
        if past.track:
            jumps.append(past.max_jump(m))
    if j1 > 0:
        fut = CellStream(cfg, dt, path_id, FUTURE, track_jumps)
        lo = max(j0, 0)
        parts.append(fut.take(j1)[lo:])
        if fut.track:
            jumps.append(fut.max_jump(j1))
    inc = np.concatenate(parts) if len(parts) > 1 else parts[0].copy()
    if jumps:
        max_jump = max(jumps)
    return NoisePath(grid, inc, cfg, max_jump)


def shift_path(path: NoisePath, k_steps: int) -> NoisePath:
    """Apply the shift theta_{k dt}: the returned path at time t is the input at t + k dt.

    Increments are untouched and the window is relabeled.  The new time
    origin (old time k dt) must lie inside the recorded window.
    """
    g = path.grid
    if int(k_steps) != k_steps:
        raise ParameterError("k_steps must be an integer")
    k = int(k_steps)
    if abs(k) > g.n_steps:
        raise OutOfWindowError(f"shift {k} exceeds the window of {g.n_steps} steps")
    if k == 0:
        return path
    origin = k * g.dt
    tol = 1e-9 * g.dt
    if not g.t_start - tol <= origin <= g.t_end + tol:
        raise OutOfWindowError(
            f"shift origin {origin} lies outside the window [{g.t_start}, {g.t_end}]")
    j0 = g.lattice_offset() - k
    shifted = TimeGrid(j0 * g.dt, (j0 + g.n_steps) * g.dt, g.n_steps)
    return NoisePath(shifted, path.levy_increments, path.config, path.max_jump)


def _wald(hits: int, n: int):
    p = hits / n
    return p, 1.96 * math.sqrt(p * (1 - p) / n)


def _running_sups(config, dt, n_cells, checkpoints, n_paths, path_offset=0):
    """sup over nodes of |L| up to each checkpoint cell count, per path."""
    out = np.empty((n_paths, len(checkpoints)))
    idx = np.asarray(checkpoints)
    for p in range(n_paths):
        s = CellStream(config, dt, path_offset + p, FUTURE)
        run = np.maximum.accumulate(np.abs(np.cumsum(s.take(n_cells))))
        out[p] = run[idx - 1]
    return out


def small_ball_probability(config: NoiseConfig, T: float, epsilon: float,
                           n_paths: int, dt: float | None = None):
    """Monte Carlo estimate of P(sup_{0<=t<=T} |L_t| < epsilon) with a 95% half-width.

    The supremum is taken over grid nodes with dt = T/1000 unless given.
    """
    if not T > 0 or not epsilon > 0:
        raise ParameterError("T and epsilon must be positive")
    if n_paths < 1000:
        raise ParameterError("n_paths must be at least 1000")
    dt = T / 1000 if dt is None else dt
    n = max(1, int(round(T / dt)))
    sups = _running_sups(config, dt, n, [n], n_paths)[:, 0]
    return _wald(int(np.count_nonzero(sups < epsilon)), n_paths)


@dataclass
class SmallBallTable:
    T: np.ndarray
    epsilon: np.ndarray
    estimate: np.ndarray
    ci_halfwidth: np.ndarray
    n_paths: int
    alpha: float
    slope: float = float("nan")
    intercept: float = float("nan")
    r2: float = float("nan")

    @property
    def x(self) -> np.ndarray:
        return self.T * self.epsilon ** -self.alpha


def small_ball_table(config: NoiseConfig, T_list, eps_list, n_paths: int,
                     dt: float | None = None) -> SmallBallTable:
    """Small-ball probabilities on a (T, epsilon) grid from common paths.

    Also fits log p against T * epsilon^{-alpha} by least squares; cells
    with no hits are left out of the fit.
    """
    T_arr = np.asarray(sorted(T_list), dtype=float)
    eps_arr = np.asarray(eps_list, dtype=float)
    if n_paths < 1000:
        raise ParameterError("n_paths must be at least 1000")
    dt = T_arr[0] / 1000 if dt is None else dt
    cps = [int(round(T / dt)) for T in T_arr]
    sups = _running_sups(config, dt, cps[-1], cps, n_paths)
    Ts, es, ps, cis = [], [], [], []
    for j, T in enumerate(T_arr):
        for e in eps_arr:
            p, ci = _wald(int(np.count_nonzero(sups[:, j] < e)), n_paths)
            Ts.append(T); es.append(e); ps.append(p); cis.append(ci)
    tab = SmallBallTable(np.array(Ts), np.array(es), np.array(ps), np.array(cis),
                         n_paths, config.alpha)
    ok = tab.estimate > 0
    if ok.sum() >= 2:
        x, y = tab.x[ok], np.log(tab.estimate[ok])
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        ss = np.sum((y - y.mean()) ** 2)
        tab.slope, tab.intercept = float(slope), float(intercept)
        tab.r2 = float(1 - resid @ resid / ss) if ss > 0 else 1.0
    return tab
