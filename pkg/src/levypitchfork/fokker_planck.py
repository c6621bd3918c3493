"""Stationary fractional Fokker-Planck equation on a truncated domain.

The stationary density solves

    0 = -(b p)' + (jump operator)^* p,   b(x) = beta x - x^3,

on [-L, L] with n cells centred at x_i = -L + (i + 1/2) dx.  The drift is
discretized by a conservative upwind flux with no flux through the ends,
so the discrete operator conserves mass exactly.

Jumps of sigma L are handled in one of two ways.

* ``"spectral"``: the jump operator is the Fourier multiplier -psi(u) on
  the periodic extension, with psi(u) = sigma^alpha |u|^alpha for stable
  noise.  The resulting dense linear system is solved directly, with
  iterative refinement against the FFT form of the operator.
* ``"kernel"``: jumps are binned onto the grid as a nonnegative rate matrix
  (cell masses of the Levy measure, weighted to preserve the second
  moment, plus a nearest-neighbour diffusion for jumps shorter than half a
  cell).  Combined with the upwind drift this is the generator of a
  continuous-time Markov chain, and its stationary vector is computed by
  GTH elimination, which involves no subtractions and so returns a
  strictly positive density.  Used for truncated noise, whose jumps are
  confined to |y| < sigma and give a banded matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy import integrate, optimize

from . import _io, _kernels
from .errors import NonConvergenceError, ParameterError, PositivityError
from .noise import NoiseConfig, c_alpha
from .sde import ModelParams

LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class GridSpec:
    L: float = 8.0
    n: int = 4096

    def __post_init__(self):
        if not self.L > 0:
            raise ParameterError(f"L={self.L!r} must be positive")
        _check_pow2(self.n)

    @property
    def dx(self) -> float:
        return 2 * self.L / self.n

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.dx * (np.arange(self.n) + 0.5)

    def frequencies(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.dx)


def _check_pow2(n):
    if int(n) != n or n < 2 or (int(n) & (int(n) - 1)):
        raise ParameterError(f"n={n!r} must be a power of two >= 2")


@dataclass(eq=False)
class DensityGrid:
    domain_halfwidth: float
    n_points: int
    values: np.ndarray
    beta: float = math.nan
    sigma: float = 1.0
    alpha: float = math.nan
    mode: str = ""
    method: str = ""
    symbol: np.ndarray | None = field(default=None, repr=False)
    residual_history: list = field(default_factory=list)
    log_values: np.ndarray | None = field(default=None, repr=False)

    @property
    def dx(self) -> float:
        return 2 * self.domain_halfwidth / self.n_points

    @property
    def x(self) -> np.ndarray:
        return GridSpec(self.domain_halfwidth, self.n_points).x

    @property
    def mass_error(self) -> float:
        return abs(float(self.values.sum() * self.dx) - 1.0)

    @property
    def log_p(self) -> np.ndarray:
        """ln p; exact even where p underflows when the solver tracked logs."""
        if self.log_values is not None:
            return self.log_values
        v = self.values
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(v > 0, np.log(v), -np.inf)

    @property
    def min_log(self) -> float:
        return float(self.log_p.min())

    @property
    def strictly_positive(self) -> bool:
        return bool(np.isfinite(self.min_log))

    @property
    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.values - self.values[::-1])))

    def modes(self) -> np.ndarray:
        """Locations of strict interior local maxima."""
        p = self.values
        i = np.flatnonzero((p[1:-1] > p[:-2]) & (p[1:-1] > p[2:])) + 1
        return self.x[i]

    def to_csv(self, path):
        return _io.write_csv(path, ("x", "p"), (self.x, self.values))

    def report(self) -> str:
        lines = [f"L={_io.fmt(self.domain_halfwidth)}", f"n_points={self.n_points}",
                 f"method={self.method}", f"mode={self.mode}",
                 f"beta={_io.fmt(self.beta)}", f"sigma={_io.fmt(self.sigma)}",
                 f"alpha={_io.fmt(self.alpha)}",
                 "residual_history=" + ",".join(_io.fmt(r) for r in self.residual_history),
                 f"min_p={_io.fmt(self.values.min())}",
                 f"min_log_p={_io.fmt(self.min_log)}",
                 f"mass_error={_io.fmt(self.mass_error)}"]
        for k in (0, 1, 2, 4):
            lines.append(f"moment_{k}={_io.fmt(density_moment(self, k))}")
        return "\n".join(lines) + "\n"

    def write_report(self, path):
        Path(path).write_text(self.report())
        return Path(path)


def fractional_laplacian(values, alpha: float, L: float) -> np.ndarray:
    """(-Delta)^{alpha/2} of grid values on [-L, L] via the multiplier |u|^alpha.

    The array is treated as one period of a periodic function.
    """
    if not 0 < alpha <= 2:
        raise ParameterError(f"alpha={alpha!r} must lie in (0, 2]")
    f = np.asarray(values, dtype=float)
    _check_pow2(f.size)
    u = 2 * np.pi * np.fft.fftfreq(f.size, d=2 * L / f.size)
    return np.fft.ifft(np.abs(u) ** alpha * np.fft.fft(f)).real


def _unit_truncated_integral(v: float, alpha: float) -> float:
    # int_0^1 (1 - cos(v z)) z^{-1-alpha} dz
    if v == 0:
        return 0.0
    z0 = min(1.0, 1.0 / v)
    # series on [0, z0] where v z <= 1
    s = 0.0
    for k in range(1, 40):
        term = (-1) ** (k + 1) * v ** (2 * k) * z0 ** (2 * k - alpha) / (
            math.factorial(2 * k) * (2 * k - alpha))
        s += term
        if abs(term) < 1e-17 * abs(s):
            break
    if z0 < 1.0:
        plain = (z0 ** -alpha - 1.0) / alpha
        osc = integrate.quad(lambda z: z ** (-1 - alpha), z0, 1.0, weight="cos",
                             wvar=v, limit=200, epsabs=1e-13, epsrel=1e-11)[0]
        s += plain - osc
    return s


def truncated_symbol(u, alpha: float, sigma: float = 1.0) -> np.ndarray:
    """psi(u) = 2 int_{0<y<sigma} (1 - cos(u y)) c_alpha sigma^alpha y^{-1-alpha} dy.

    This is the symbol of sigma times the truncated process, i.e. the
    pushforward of nu restricted to |z| < 1; it equals psi_1(sigma u).
    """
    u = np.atleast_1d(np.abs(np.asarray(u, dtype=float)))
    c = c_alpha(alpha)
    cache: dict[float, float] = {}
    out = np.empty(u.shape)
    for i, v in np.ndenumerate(u):
        w = float(v * sigma)
        if w not in cache:
            cache[w] = 2 * c * _unit_truncated_integral(w, alpha)
        out[i] = cache[w]
    return out


def stable_symbol(u, alpha: float, sigma: float) -> np.ndarray:
    return sigma ** alpha * np.abs(u) ** alpha


def jump_kernel_rates(alpha: float, sigma: float, dx: float, cutoff: float | None):
    """Per-offset jump rates w_j (j = 1, 2, ...) on a grid of step dx.

    Offset j collects the Levy mass of sigma*L on [(j - 1/2) dx, (j + 1/2) dx]
    (one side), weighted by (second moment of that cell) / (j dx)^2 so the
    discrete kernel keeps the second moment of every band.  Jumps shorter
    than dx/2 become a diffusion with rate D0/dx^2 to each neighbour, which
    is added to w_1.  ``cutoff`` is the largest jump (sigma for truncated
    noise, None for unbounded).
    """
    c = c_alpha(alpha) * sigma ** alpha
    h = dx / 2
    cap = math.inf if cutoff is None else cutoff

    def m2(lo, hi):
        return c * (hi ** (2 - alpha) - lo ** (2 - alpha)) / (2 - alpha)

    if cutoff is None:
        raise ParameterError("unbounded jump kernels need the spectral method")
    nj = int(math.floor(cap / dx + 0.5))
    j = np.arange(1, nj + 1)
    lo = np.minimum((j - 0.5) * dx, cap)
    hi = np.minimum((j + 0.5) * dx, cap)
    w = m2(lo, hi) / (j * dx) ** 2
    d0 = m2(0.0, min(h, cap))
    w[0] += d0 / dx ** 2
    return w


def _drift_faces(beta, cubic, x, dx):
    xf = x[:-1] + dx / 2
    bf = beta * xf - (xf ** 3 if cubic else 0.0)
    return np.maximum(bf, 0.0) / dx, np.maximum(-bf, 0.0) / dx  # right, left rates


class StationaryOperator:
    """Discrete forward operator A with dp/dtau = A p; columns sum to zero."""

    def __init__(self, params: ModelParams, noise_cfg: NoiseConfig, grid: GridSpec,
                 method: str = "auto"):
        if params.sigma != noise_cfg.sigma:
            raise ParameterError("model sigma differs from noise sigma")
        if not noise_cfg.sigma > 0:
            raise ParameterError("a stationary density needs sigma > 0")
        if method == "auto":
            method = "kernel" if noise_cfg.truncated else "spectral"
        if method not in ("spectral", "kernel"):
            raise ParameterError(f"method={method!r} must be 'auto', 'spectral' or 'kernel'")
        if method == "kernel" and not noise_cfg.truncated:
            raise ParameterError("the kernel method needs truncated noise")
        self.params, self.cfg, self.grid, self.method = params, noise_cfg, grid, method
        a, s = noise_cfg.alpha, noise_cfg.sigma
        u = grid.frequencies()
        self.right, self.left = _drift_faces(params.beta, params.cubic, grid.x, grid.dx)
        if method == "kernel":
            self.w = jump_kernel_rates(a, s, grid.dx, s)
            K = np.zeros(grid.n)
            K[1:self.w.size + 1] += self.w
            K[grid.n - self.w.size:] += self.w[::-1]
            K[0] = -K.sum()
            self.symbol = np.maximum(-np.fft.fft(K).real, 0.0)
        elif noise_cfg.truncated:
            self.symbol = truncated_symbol(u, a, s)
        else:
            self.symbol = stable_symbol(u, a, s)

    def apply_jump(self, p):
        if self.method == "spectral":
            return np.fft.ifft(-self.symbol * np.fft.fft(p)).real
        # censored: jumps leaving the domain are not made
        n, w = p.size, self.w
        out = np.zeros(n)
        for j in range(1, min(w.size, n - 1) + 1):
            out[j:] += w[j - 1] * p[:-j]
            out[:-j] += w[j - 1] * p[j:]
            out[:-j] -= w[j - 1] * p[:-j]
            out[j:] -= w[j - 1] * p[j:]
        return out

    def apply_drift(self, p):
        flux = self.right * p[:-1] - self.left * p[1:]  # F_{i+1/2} * ... / dx
        out = np.zeros(p.size)
        out[:-1] -= flux
        out[1:] += flux
        return out

    def apply(self, p):
        return self.apply_drift(p) + self.apply_jump(p)

    def residual(self, p) -> float:
        return float(np.abs(self.apply(p)).sum() * self.grid.dx)

    def march(self, p, n_steps: int, dtau: float):
        """Explicit Euler in pseudo-time; returns the final state and per-step mass errors."""
        p = np.array(p, dtype=float)
        dx = self.grid.dx
        errs = np.empty(n_steps)
        m0 = p.sum() * dx
        for i in range(n_steps):
            p = p + dtau * self.apply(p)
            errs[i] = abs(p.sum() * dx - m0)
        return p, errs

    def dense_matrix(self) -> np.ndarray:
        n = self.grid.n
        if self.method == "spectral":
            A = sla.circulant(np.fft.ifft(-self.symbol).real)
        else:
            A = np.zeros((n, n))
            for j, wj in enumerate(self.w, start=1):
                idx = np.arange(n - j)
                A[idx + j, idx] += wj
                A[idx, idx + j] += wj
                A[idx, idx] -= wj
                A[idx + j, idx + j] -= wj
        i = np.arange(n - 1)
        A[i, i] -= self.right
        A[i + 1, i] += self.right
        A[i + 1, i + 1] -= self.left
        A[i, i + 1] += self.left
        return A

    def banded_rates(self) -> np.ndarray:
        """rates[i, d] = rate from cell i to cell i + d - bw (kernel method only)."""
        n, w = self.grid.n, self.w
        bw = w.size
        R = np.zeros((n, 2 * bw + 1))
        for j in range(1, bw + 1):
            R[: n - j, bw + j] += w[j - 1]
            R[j:, bw - j] += w[j - 1]
        R[: n - 1, bw + 1] += self.right
        R[1:, bw - 1] += self.left
        return R


def _solve_dense(op: StationaryOperator, tol: float, max_refine: int):
    n, dx = op.grid.n, op.grid.dx
    M = op.dense_matrix()
    M[0, :] = dx
    lu = sla.lu_factor(M, overwrite_a=True, check_finite=False)
    del M
    rhs = np.zeros(n)
    rhs[0] = 1.0
    p = sla.lu_solve(lu, rhs, check_finite=False)
    history = [op.residual(p)]
    for _ in range(max_refine):
        if history[-1] < tol:
            break
        r = op.apply(p)
        r[0] = p.sum() * dx - 1.0
        p = p - sla.lu_solve(lu, r, check_finite=False)
        history.append(op.residual(p))
    return p, history


def _solve_gth(op: StationaryOperator):
    R = op.banded_rates()
    logp = _kernels.gth_banded(R, op.w.size) - math.log(op.grid.dx)
    p = np.exp(logp)
    return p, [op.residual(p)], logp


def stationary_density(params: ModelParams, noise_cfg: NoiseConfig,
                       grid_spec: GridSpec = GridSpec(), method: str = "auto",
                       tol: float = 1e-8, max_refine: int = 5,
                       auto_domain: bool = False, max_L: float = 128.0) -> DensityGrid:
    """Stationary density on ``grid_spec``.

    ``method="auto"`` picks the spectral solve for stable noise and the
    positivity-preserving kernel solve for truncated noise.  With
    ``auto_domain`` the half-width is doubled (keeping dx fixed) until
    the direct Lyapunov integral changes by less than 1%.
    """
    if grid_spec.L < 4 * max(1.0, math.sqrt(abs(params.beta))):
        raise ParameterError("domain half-width L must be at least 4 max(1, sqrt|beta|)")
    dens = _stationary(params, noise_cfg, grid_spec, method, tol, max_refine)
    if not auto_domain:
        return dens
    prev = lambda_direct(dens, params.beta)
    g = grid_spec
    while 2 * g.L <= max_L:
        g = GridSpec(2 * g.L, 2 * g.n)
        dens = _stationary(params, noise_cfg, g, method, tol, max_refine)
        cur = lambda_direct(dens, params.beta)
        if abs(cur - prev) < 0.01 * abs(prev):
            break
        prev = cur
    return dens


def _stationary(params, noise_cfg, grid_spec, method, tol, max_refine):
    op = StationaryOperator(params, noise_cfg, grid_spec, method)
    if op.method == "kernel":
        p, history, logp = _solve_gth(op)
    else:
        p, history = _solve_dense(op, tol, max_refine)
        logp = None
    if not history[-1] < tol:
        raise NonConvergenceError(
            f"stationary residual {history[-1]:.3e} above {tol:.1e}", history)
    mass = p.sum() * grid_spec.dx
    p = p / mass
    if logp is not None:
        logp = logp - math.log(mass)
    return DensityGrid(grid_spec.L, grid_spec.n, p, params.beta, noise_cfg.sigma,
                       noise_cfg.alpha, noise_cfg.mode.value, op.method, op.symbol,
                       history, logp)


def density_moment(density: DensityGrid, n: int) -> float:
    return float(np.sum(density.x ** n * density.values) * density.dx)


def lambda_direct(density: DensityGrid, beta: float) -> float:
    return float(np.sum((beta - 3 * density.x ** 2) * density.values) * density.dx)


def lyapunov_from_density(density: DensityGrid, beta: float, alpha: float | None = None):
    """(lambda_direct, lambda_dirichlet) from a strictly positive density.

    lambda_direct = int (beta - 3 x^2) p dx.  lambda_dirichlet =
    -int A^{1/2} ln p * A^{1/2} p dx where A is the jump operator the
    density was solved with (symbol psi, so A^{1/2} has symbol sqrt(psi));
    for stable noise psi(u) = sigma^alpha |u|^alpha.
    """
    p = np.asarray(density.values)
    lp = density.log_p
    bad = ~np.isfinite(lp) if density.log_values is not None else (p <= 0)
    if np.any(bad):
        raise PositivityError(f"density has {np.count_nonzero(bad)} non-positive entries")
    if density.symbol is not None:
        psi = density.symbol
    else:
        a = density.alpha if alpha is None else alpha
        u = GridSpec(density.domain_halfwidth, density.n_points).frequencies()
        psi = stable_symbol(u, a, density.sigma)
    root = np.sqrt(psi)
    if density.log_values is None:
        lp = np.log(np.maximum(p, LOG_FLOOR))
    h1 = np.fft.ifft(root * np.fft.fft(lp)).real
    h2 = np.fft.ifft(root * np.fft.fft(p)).real
    return lambda_direct(density, beta), float(-np.sum(h1 * h2) * density.dx)


def moment_bound(beta: float, sigma: float, alpha: float) -> tuple[float, float]:
    """min over lambda > 0 of (1/lambda)[(lambda + 2 beta)^2 / 8 + 2 c_alpha sigma^2 / (2 - alpha)].

    Returns (bound, minimizing lambda).
    """
    C = 2 * c_alpha(alpha) * sigma ** 2 / (2 - alpha)

    def f(s):
        lam = math.exp(s)
        return ((lam + 2 * beta) ** 2 / 8 + C) / lam

    guess = math.log(max(1e-8, math.sqrt(4 * beta ** 2 + 8 * C)))
    res = optimize.minimize_scalar(f, bracket=(guess - 1, guess, guess + 1),
                                   tol=1e-12)
    return float(res.fun), float(math.exp(res.x))


def tail_exponent(density: DensityGrid, lo_frac: float = 0.75, hi_frac: float = 1.0):
    """Least-squares slope of ln p against ln |x| over lo_frac*L <= |x| <= hi_frac*L."""
    x, p = density.x, density.values
    ax = np.abs(x)
    L = density.domain_halfwidth
    m = (ax >= lo_frac * L) & (ax <= hi_frac * L) & (p > 0)
    slope, _ = np.polyfit(np.log(ax[m]), np.log(p[m]), 1)
    return float(slope)
