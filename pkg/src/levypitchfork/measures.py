"""Empirical measures on the line, Wasserstein distances and ergodic decay fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _io
from .errors import OutOfWindowError, ParameterError


class EmpiricalMeasure:
    """Sorted sample set standing in for a probability measure on R."""

    __slots__ = ("samples",)

    def __init__(self, samples):
        s = np.sort(np.asarray(samples, dtype=float).ravel())
        if s.size < 1:
            raise ParameterError("an empirical measure needs at least one sample")
        if not np.all(np.isfinite(s)):
            raise ParameterError("samples must be finite")
        s.setflags(write=False)
        self.samples = s

    @property
    def n(self) -> int:
        return self.samples.size

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"EmpiricalMeasure(n={self.n}, mean={self.mean():.4g})"

    def mean(self) -> float:
        return float(self.samples.mean())

    def moment(self, k: int) -> float:
        return float(np.mean(self.samples ** k))

    def stderr(self) -> float:
        return float(self.samples.std(ddof=1) / math.sqrt(self.n)) if self.n > 1 else math.inf

    def quantile(self, q):
        """Inverse CDF by linear interpolation between order statistics."""
        return np.quantile(self.samples, q)

    def resample(self, n: int) -> "EmpiricalMeasure":
        """Quantile resampling to ``n`` points; identity when n equals self.n."""
        if n == self.n:
            return self
        if self.n == 1:
            return EmpiricalMeasure(np.full(n, self.samples[0]))
        q = (np.arange(n) + 0.5) / n
        pos = q * self.n - 0.5
        return EmpiricalMeasure(np.interp(pos, np.arange(self.n), self.samples))

    def histogram(self, edges) -> np.ndarray:
        """Density histogram normalized by the total sample count."""
        counts, _ = np.histogram(self.samples, bins=edges)
        return counts / (self.n * np.diff(edges))


def wasserstein(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float = 1.0) -> float:
    """W_p between two empirical measures via the sorted pairing.

    Unequal sample counts are brought to the larger count by quantile
    resampling of the smaller measure.
    """
    if not p >= 1:
        raise ParameterError(f"p={p!r} must be >= 1")
    if mu.n != nu.n:
        n = max(mu.n, nu.n)
        mu, nu = mu.resample(n), nu.resample(n)
    d = np.abs(mu.samples - nu.samples)
    if p == 1:
        return float(d.mean())
    if math.isinf(p):
        return float(d.max())
    return float(np.mean(d ** p) ** (1.0 / p))


def l1_density_distance(samples, x, p) -> float:
    """L1 distance between a gridded density and the histogram of samples.

    The histogram uses the density grid's own cells, and the density mass
    outside the grid is taken as zero.
    """
    x = np.asarray(x, dtype=float)
    dx = x[1] - x[0]
    edges = np.concatenate((x - dx / 2, [x[-1] + dx / 2]))
    s = np.asarray(samples, dtype=float)
    h, _ = np.histogram(s, bins=edges)
    h = h / (s.size * dx)
    outside = np.count_nonzero((s < edges[0]) | (s >= edges[-1])) / s.size
    return float(np.sum(np.abs(h - p)) * dx + outside)


def l1_binned(samples, x, p, bin_width: float) -> float:
    """Like :func:`l1_density_distance` but on coarser bins made of whole grid cells."""
    x = np.asarray(x, dtype=float)
    dx = x[1] - x[0]
    m = max(1, int(round(bin_width / dx)))
    n = (x.size // m) * m
    off = (x.size - n) // 2
    xs, ps = x[off:off + n], np.asarray(p)[off:off + n]
    mass = ps.reshape(-1, m).sum(axis=1) * dx
    edges = np.concatenate((xs[::m] - dx / 2, [xs[-1] + dx / 2]))
    s = np.asarray(samples, dtype=float)
    h, _ = np.histogram(s, bins=edges)
    outside_s = 1 - h.sum() / s.size
    outside_p = max(0.0, 1 - mass.sum())
    return float(np.sum(np.abs(h / s.size - mass)) + abs(outside_s - outside_p))


@dataclass
class DecayReport:
    t: np.ndarray
    w1: np.ndarray
    K: float
    c: float
    r2: float
    w1_initial: float
    noise_floor: float
    fit_mask: np.ndarray

    def envelope(self, t=None) -> np.ndarray:
        t = self.t if t is None else np.asarray(t)
        return self.K * np.exp(-self.c * t) * self.w1_initial

    def within_envelope(self, factor: float = 1.5, floor_factor: float = 2.0) -> bool:
        """Every checkpoint below factor * envelope, or already at the noise floor."""
        cap = np.maximum(factor * self.envelope(), floor_factor * self.noise_floor)
        return bool(np.all(self.w1 <= cap))

    def to_csv(self, path):
        return _io.write_csv(path, ("t", "w1"), (self.t, self.w1))

    def summary_line(self) -> str:
        return f"K,c,R2\n{_io.fmt(self.K)},{_io.fmt(self.c)},{_io.fmt(self.r2)}\n"


def fit_exponential_decay(t, w, w_initial, mask=None):
    """Least-squares fit log w = log(K w_initial) - c t; returns (K, c, R2)."""
    t = np.asarray(t, dtype=float)
    w = np.asarray(w, dtype=float)
    mask = np.ones(t.size, bool) if mask is None else np.asarray(mask)
    mask = mask & (w > 0)
    if mask.sum() < 2:
        return math.nan, math.nan, math.nan
    tt, y = t[mask], np.log(w[mask])
    slope, icpt = np.polyfit(tt, y, 1)
    resid = y - (slope * tt + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1 - resid @ resid / ss if ss > 0 else 1.0
    return float(math.exp(icpt) / w_initial), float(-slope), float(r2)


def ergodicity_decay(params, noise_cfg, initial: EmpiricalMeasure, t_checkpoints,
                     n_paths: int, dt: float = 1e-3, horizon: float | None = None,
                     floor_factor: float = 2.0, threads=None,
                     pullback_kw=None) -> DecayReport:
    """W1 between the law at time t started from ``initial`` and the stationary law.

    Path i starts from a quantile draw of ``initial`` and runs on omega_i
    next to the random equilibrium a(theta_t omega_i) on the same noise.
    The equilibrium values at time t are exact stationary samples, so
    W1(law_t, rho) is estimated by the sorted pairing of the two clouds
    without an extra independent-sample noise floor.  The fit uses the
    checkpoints whose W1 is above ``floor_factor`` times the floor, the
    floor being W1 between the even- and odd-indexed halves of the
    stationary sample at time 0.
    """
    from .attractor import forward_pairs

    t = np.asarray(t_checkpoints, dtype=float)
    if t.size < 2 or np.any(np.diff(t) <= 0) or t[0] < 0:
        raise ParameterError("t_checkpoints must be increasing and non-negative")
    if horizon is not None and t[-1] > horizon + 1e-12:
        raise OutOfWindowError(f"checkpoint {t[-1]} beyond simulated horizon {horizon}")
    q = (np.arange(n_paths) + 0.5) / n_paths
    # decorrelate start points from path index while staying deterministic
    order = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(noise_cfg.seed, spawn_key=(2**31, 2)))).permutation(n_paths)
    x0 = np.asarray(initial.quantile(q))[order]
    X, A = forward_pairs(params, noise_cfg, x0, t, dt=dt, threads=threads,
                         pullback_kw=pullback_kw)
    w1 = np.array([wasserstein(EmpiricalMeasure(X[:, j]), EmpiricalMeasure(A[:, j]))
                   for j in range(t.size)])
    a0 = A[:, 0]
    floor = wasserstein(EmpiricalMeasure(a0[0::2]), EmpiricalMeasure(a0[1::2]))
    w_init = wasserstein(initial.resample(n_paths), EmpiricalMeasure(a0))
    mask = w1 > floor_factor * floor
    K, c, r2 = fit_exponential_decay(t, w1, w_init, mask)
    return DecayReport(t, w1, K, c, r2, w_init, floor, mask)
