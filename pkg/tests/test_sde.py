import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from levypitchfork.errors import OutOfWindowError, ParameterError
from levypitchfork.noise import NoiseConfig, TimeGrid, sample_path
from levypitchfork.sde import (ModelParams, Trajectory, compare_to_forced_ode,
                               comparison_epsilon, drift, equilibria, forced_ode_gap,
                               integrate, linearized_flow, log_linearized_flow)


def rk4(f, x0, T, h):
    x = x0
    for _ in range(int(round(T / h))):
        k1 = f(x)
        k2 = f(x + h / 2 * k1)
        k3 = f(x + h / 2 * k2)
        k4 = f(x + h * k3)
        x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def quiet(T, dt=1e-3, t0=0.0):
    return sample_path(NoiseConfig(1.5, 0.0), TimeGrid.from_dt(t0, T, dt))


def noisy(seed, T=5.0, dt=1e-3, sigma=0.5, mode="nontruncated", path_id=0, t0=0.0):
    cfg = NoiseConfig(1.5, sigma, mode, seed=seed)
    return sample_path(cfg, TimeGrid.from_dt(t0, T, dt), path_id=path_id)


@pytest.mark.parametrize("beta,x,expected", [(0.3, 0.0, 0.0), (-2.0, 0.0, 0.0),
                                             (1.0, 1.0, 0.0), (-1.0, 2.0, -10.0)])
def test_drift_values(beta, x, expected):
    assert drift(beta, x) == expected


def test_equilibria_are_square_roots():
    assert equilibria(4.0) == (-2.0, 0.0, 2.0)
    assert equilibria(-1.0) == (0.0,)
    for e in equilibria(2.0):
        assert drift(2.0, e) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("scheme", ["split", "tamed"])
def test_equilibrium_preserved(scheme):
    tr = integrate(ModelParams(1.0, 0.0), quiet(10.0), 1.0, scheme=scheme)
    assert abs(tr.states[-1] - 1.0) < 1e-6


@pytest.mark.parametrize("scheme", ["split", "tamed"])
def test_matches_rk4_oracle(scheme):
    ref = rk4(lambda x: -x - x ** 3, 1.0, 10.0, 1e-5)
    tr = integrate(ModelParams(-1.0, 0.0), quiet(10.0), 1.0, scheme=scheme)
    assert abs(tr.states[-1] - ref) < 1e-4


def test_split_flow_matches_rk4_at_moderate_time():
    # away from the origin the comparison is not dominated by e^{-10}
    ref = rk4(lambda x: 0.5 * x - x ** 3, 3.0, 0.7, 1e-5)
    tr = integrate(ModelParams(0.5, 0.0), quiet(0.7), 3.0)
    assert tr.states[-1] == pytest.approx(ref, rel=1e-9)


def test_tamed_first_order_convergence():
    ref = rk4(lambda x: -x - x ** 3, 2.0, 1.0, 1e-5)
    errs = [abs(integrate(ModelParams(-1.0, 0.0), quiet(1.0, dt), 2.0, "tamed").states[-1] - ref)
            for dt in (1e-2, 5e-3, 2.5e-3)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 0.9)


def test_order_preserved_example():
    p = noisy(seed=3, T=20.0)
    m = ModelParams(1.0, 0.5)
    lo, hi = integrate(m, p, -2.0).states, integrate(m, p, 2.0).states
    assert np.all(lo < hi)


@given(seed=st.integers(0, 2**32), x0=st.floats(-20, 20), gap=st.floats(1e-6, 30),
       beta=st.floats(-2, 2), truncated=st.booleans())
def test_order_preserved_property(seed, x0, gap, beta, truncated):
    p = noisy(seed, T=2.0, mode="truncated" if truncated else "nontruncated")
    m = ModelParams(beta, 0.5)
    a, b = integrate(m, p, x0).states, integrate(m, p, x0 + gap).states
    assert np.all(a < b)


@given(seed=st.integers(0, 2**32), x0=st.floats(-15, 15), y0=st.floats(-15, 15),
       beta=st.floats(-2, -0.01))
def test_contraction_and_gronwall(seed, x0, y0, beta):
    p = noisy(seed, T=3.0)
    m = ModelParams(beta, 0.5)
    d = np.abs(integrate(m, p, x0).states - integrate(m, p, y0).states)
    bound = abs(x0 - y0) * np.exp(beta * p.grid.times)
    assert np.all(d <= bound * (1 + 1e-8) + 1e-300)


def test_zero_sigma_and_noise_mismatch():
    with pytest.raises(ParameterError):
        integrate(ModelParams(1.0, 0.3), noisy(1, sigma=0.5), 0.0)
    with pytest.raises(ParameterError):
        integrate(ModelParams(1.0, 0.5), noisy(1), math.inf)
    with pytest.raises(ParameterError):
        integrate(ModelParams(1.0, 0.5), noisy(1), 0.0, scheme="rk4")
    with pytest.raises(ParameterError):
        ModelParams(math.nan, 0.5)


def test_no_overflow_under_huge_jump():
    cfg = NoiseConfig(1.5, 1.0, seed=0)
    grid = TimeGrid.from_dt(0, 0.01, 1e-3)
    inc = np.zeros(10)
    inc[3] = 1e200
    from levypitchfork.noise import NoisePath
    tr = integrate(ModelParams(1.0, 1.0), NoisePath(grid, inc, cfg), 0.0)
    assert np.all(np.isfinite(tr.states))
    assert abs(tr.states[-1]) < 100


def zero_traj(beta, T, dt=1e-3):
    g = TimeGrid.from_dt(0.0, T, dt)
    return Trajectory(g, np.zeros(g.n_steps + 1), ModelParams(beta, 0.5))


@pytest.mark.parametrize("quadrature", ["exact", "trapezoid"])
def test_linearized_flow_zero_trajectory(quadrature):
    tr = zero_traj(0.5, 2.0)
    assert linearized_flow(tr.params, tr, 2000, quadrature) == pytest.approx(math.e, rel=1e-12)
    assert linearized_flow(tr.params, tr, 0, quadrature) == 1.0


def test_linearized_flow_index_errors():
    tr = zero_traj(0.5, 1.0)
    with pytest.raises(OutOfWindowError):
        linearized_flow(tr.params, tr, 1001)
    with pytest.raises(OutOfWindowError):
        linearized_flow(tr.params, tr, -1)


@given(seed=st.integers(0, 2**32), beta=st.floats(-2, 2), x0=st.floats(-5, 5))
def test_linearized_flow_below_exp_beta_t(seed, beta, x0):
    p = noisy(seed, T=2.0, dt=1e-2)
    m = ModelParams(beta, 0.5)
    tr = integrate(m, p, x0)
    for i in (1, 50, 200):
        assert log_linearized_flow(m, tr, i) <= beta * i * p.grid.dt + 1e-12


def test_exact_cocycle_is_derivative_of_the_scheme():
    p = noisy(5, T=2.0)
    m = ModelParams(1.0, 0.5)
    x0, h = 0.3, 1e-6
    tr = integrate(m, p, x0)
    fd = (integrate(m, p, x0 + h).states[-1] - integrate(m, p, x0 - h).states[-1]) / (2 * h)
    assert linearized_flow(m, tr, p.grid.n_steps) == pytest.approx(fd, rel=1e-5)


def test_quadratures_agree_on_smooth_paths():
    m = ModelParams(-1.0, 0.0)
    tr = integrate(m, quiet(3.0), 2.0)
    a = log_linearized_flow(m, tr, 3000, "exact")
    b = log_linearized_flow(m, tr, 3000, "trapezoid")
    assert a == pytest.approx(b, rel=1e-4)


def test_forced_ode_identical_inputs():
    p = noisy(7)
    m = ModelParams(1.0, 0.5)
    assert forced_ode_gap(m, p, p.values, 0.4) == 0.0
    assert compare_to_forced_ode(m, p, p.values, 0.4, delta=0.0)


def test_forced_ode_gronwall_without_noise():
    T, eps = 2.0, 1e-3
    for beta in (-1.0, 0.5, 1.0):
        p = quiet(T)
        m = ModelParams(beta, 0.0)
        gap = forced_ode_gap(m, p, np.zeros(p.grid.n_steps + 1), 0.2, 0.2 + eps)
        assert gap <= eps * math.exp(abs(beta) * T) * (1 + 1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_forced_ode_comparison_event(seed):
    beta, sigma, T, delta = 1.0, 0.5, 1.0, 0.1
    p = noisy(seed, T=T, sigma=sigma)
    eps = comparison_epsilon(beta, sigma, T, delta)
    t = p.grid.times
    g = p.values + 0.99 * eps * np.sin(7 * t + seed)  # sup |L - g| < eps
    assert np.max(np.abs(p.values - g)) < eps
    assert compare_to_forced_ode(ModelParams(beta, sigma), p, g, 0.1, delta)


def test_forced_ode_callable_and_mismatch():
    p = quiet(1.0, dt=0.01)
    m = ModelParams(-1.0, 0.0)
    assert forced_ode_gap(m, p, lambda t: 0.0, 1.0) == 0.0
    with pytest.raises(ParameterError):
        forced_ode_gap(m, p, np.zeros(5), 1.0)


def test_trajectory_csv(tmp_path):
    tr = integrate(ModelParams(1.0, 0.5), noisy(2, T=0.1), 0.3)
    from levypitchfork._io import read_csv
    h, d = read_csv(tr.to_csv(tmp_path / "t.csv"))
    assert h == ["t", "x"] and np.array_equal(d[:, 1], tr.states)
