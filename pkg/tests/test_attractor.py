import math

import numpy as np
import pytest

from levypitchfork.attractor import (PullbackSettings, equilibrium_ensemble, equilibrium_records,
                                     max_offset_gap, pullback_attractor, pullback_stream,
                                     vicinity_probability, vicinity_table)
from levypitchfork.errors import CollapseError, OutOfWindowError, ParameterError
from levypitchfork.fokker_planck import density_moment, stationary_density
from levypitchfork.noise import NoiseConfig, TimeGrid, sample_path, shift_path
from levypitchfork.sde import ModelParams, integrate


def window(cfg, t0, t1, dt=1e-3, path_id=0):
    return sample_path(cfg, TimeGrid.from_dt(t0, t1, dt), path_id=path_id)


def test_deterministic_origin():
    cfg = NoiseConfig(1.5, 0.0)
    r = pullback_attractor(ModelParams(-1.0, 0.0), window(cfg, -20, 0), 20.0, (-10, 10))
    assert r.diameter < 1e-6
    assert abs(r.equilibrium_estimate) < 1e-6


@pytest.mark.parametrize("path_id", range(5))
def test_truncated_contraction_bound(path_id):
    cfg = NoiseConfig(1.5, 0.5, "truncated", seed=2)
    r = pullback_attractor(ModelParams(-1.0, 0.5), window(cfg, -20, 0, path_id=path_id), 20.0,
                           (-10, 10), tol=1e-8)
    assert r.diameter <= math.exp(-20) * 20 + 1e-8
    assert r.endpoints_at_zero[0] <= r.endpoints_at_zero[1]


def test_window_too_short():
    cfg = NoiseConfig(1.5, 0.5)
    with pytest.raises(OutOfWindowError):
        pullback_attractor(ModelParams(1.0, 0.5), window(cfg, -5, 0), 10.0)
    with pytest.raises(ParameterError):
        pullback_attractor(ModelParams(1.0, 0.5), window(cfg, -5, 0), 5.0, (1, 1))


def test_window_and_stream_agree():
    cfg = NoiseConfig(1.5, 0.5, "truncated", seed=9)
    m = ModelParams(1.0, 0.5)
    s = pullback_stream(m, cfg, 4, PullbackSettings(T=50, T_max=50))
    w = pullback_attractor(m, window(cfg, -50, 1, path_id=4), 50.0)
    assert s.endpoints_at_zero == w.endpoints_at_zero


def test_small_noise_synchronization():
    # sigma = 0.1: one endpoint must jump across the barrier, so the default
    # horizon policy (T = 50 doubled up to 800) is what makes every run collapse
    cfg = NoiseConfig(1.5, 0.1, seed=21)
    m = ModelParams(1.0, 0.1)
    s = PullbackSettings(T=50, tol=1e-4)
    rec = equilibrium_records(m, cfg, 1000, s)
    assert np.all(rec.diameter < 1e-4)
    for i in range(0, 1000, 100):
        T = rec.horizon[i]
        longer = pullback_stream(m, cfg, int(rec.path_id[i]),
                                 PullbackSettings(T=2 * T, T_max=2 * T, tol=1e-4))
        assert abs(longer.equilibrium_estimate - rec.equilibrium[i]) <= 1e-4


@pytest.mark.parametrize("mode", ["nontruncated", "truncated"])
@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
@pytest.mark.parametrize("beta", [-1.0, 0.0, 1.0])
def test_estimate_stable_under_horizon_doubling(beta, alpha, mode):
    cfg = NoiseConfig(alpha, 0.5, mode, seed=31)
    m = ModelParams(beta, 0.5)
    for i in range(3):
        r = pullback_stream(m, cfg, i)
        assert r.collapsed
        r2 = pullback_stream(m, cfg, i, PullbackSettings(T=2 * r.pullback_horizon,
                                                         T_max=2 * r.pullback_horizon))
        assert abs(r.equilibrium_estimate - r2.equilibrium_estimate) < r.tol


@pytest.mark.parametrize("beta", [-1.0, 1.0])
def test_random_fixed_point_property(beta):
    cfg = NoiseConfig(1.5, 0.5, seed=13)
    m = ModelParams(beta, 0.5)
    T, T0, dt = 3.0, 60.0, 1e-3
    w = window(cfg, -T0, T, dt)
    a0 = pullback_attractor(m, w, T0)
    assert a0.collapsed
    fwd = integrate(m, shift_path(w, 0), a0.equilibrium_estimate)
    i0, iT = w.grid.index_of(0.0), w.grid.index_of(T)
    forward_at_T = integrate(m, sample_path(cfg, TimeGrid.from_dt(0, T, dt)),
                             a0.equilibrium_estimate).states[-1]
    shifted = shift_path(w, int(round(T / dt)))  # theta_T omega
    aT = pullback_attractor(m, shifted, T0 + T)
    assert abs(forward_at_T - aT.equilibrium_estimate) < 10 * a0.tol
    assert fwd.states.size == w.grid.n_steps + 1 and iT > i0


def test_ensemble_mean_symmetric():
    cfg = NoiseConfig(1.5, 0.5, seed=41)
    mu = equilibrium_ensemble(ModelParams(1.0, 0.5), cfg, n_paths=1000)
    assert abs(mu.mean()) < 3 * mu.stderr()


def test_ensemble_bimodal_small_truncated_noise():
    cfg = NoiseConfig(1.5, 0.1, "truncated", seed=42)
    mu = equilibrium_ensemble(ModelParams(1.0, 0.1), cfg, n_paths=1000)
    edges = np.linspace(-2, 2, 41)
    h = mu.histogram(edges)
    centres = 0.5 * (edges[1:] + edges[:-1])
    left, right = centres[np.argmax(np.where(centres < 0, h, -1))], centres[np.argmax(np.where(centres > 0, h, -1))]
    assert abs(left + 1) < 0.1 and abs(right - 1) < 0.1


@pytest.mark.parametrize("mode", ["truncated", "nontruncated"])
def test_second_moment_matches_density(mode):
    cfg = NoiseConfig(1.5, 0.5, mode, seed=43)
    m = ModelParams(-1.0, 0.5)
    mu = equilibrium_ensemble(m, cfg, n_paths=4000, settings=PullbackSettings(T=25))
    assert mu.moment(2) == pytest.approx(density_moment(stationary_density(m, cfg), 2), rel=0.05)


def test_ensemble_requires_enough_paths():
    with pytest.raises(ParameterError):
        equilibrium_ensemble(ModelParams(1.0, 0.5), NoiseConfig(), n_paths=10)


def test_collapse_failure_is_reported():
    cfg = NoiseConfig(1.5, 0.5, seed=1)
    s = PullbackSettings(T=0.5, T_max=1.0, tol=1e-12)
    rec = equilibrium_records(ModelParams(1.0, 0.5), cfg, 20, s)
    assert rec.failed.size == 20
    with pytest.raises(CollapseError) as ei:
        equilibrium_ensemble(ModelParams(1.0, 0.5), cfg, n_paths=1000, settings=s)
    assert len(ei.value.failed_paths) == 1000


def test_ensemble_csv(tmp_path):
    cfg = NoiseConfig(1.5, 0.5, seed=3)
    rec = equilibrium_records(ModelParams(1.0, 0.5), cfg, 5)
    text = rec.to_csv(tmp_path / "e.csv").read_text().splitlines()
    assert text[0] == "path_id,equilibrium,diameter,collapsed"
    assert len(text) == 6 and text[1].startswith("0,") and text[1].endswith(",1")


@pytest.fixture(scope="module")
def vicinity_grid():
    cfg = NoiseConfig(1.5, 0.5, seed=51)
    return vicinity_table(ModelParams(1.0, 0.5), cfg, [0.25, 0.5, 1.0, 1e6], [0.5, 1.0, 2.0],
                          10_000, PullbackSettings(T=25))


def test_vicinity_positive(vicinity_grid):
    est, ci = vicinity_grid
    assert est[1, 1] - ci[1, 1] > 0


def test_vicinity_trivial_and_monotone(vicinity_grid):
    est, ci = vicinity_grid
    assert np.all(est[3] == 1.0)
    assert np.all(np.diff(est, axis=0) >= 0)
    assert np.all(np.diff(est, axis=1) <= 0)


def test_vicinity_probability_matches_table():
    cfg = NoiseConfig(1.5, 0.5, seed=52)
    m = ModelParams(1.0, 0.5)
    p, ci = vicinity_probability(m, cfg, 1e6, 1.0, 200)
    assert p == 1.0 and ci == 0.0
    with pytest.raises(ParameterError):
        vicinity_probability(m, cfg, 0.0, 1.0, 200)


def test_attraction_not_uniform_for_positive_beta():
    beta = 1.0
    cfg = NoiseConfig(1.5, 0.5, seed=61)
    gaps = max_offset_gap(ModelParams(beta, 0.5), cfg, 0.1, 5.0, 10_000, t_from=1.0,
                          settings=PullbackSettings(T=25))
    assert gaps.max() > math.sqrt(beta) / 4


def test_attraction_uniform_for_negative_beta():
    cfg = NoiseConfig(1.5, 0.5, seed=62)
    gaps = max_offset_gap(ModelParams(-1.0, 0.5), cfg, 0.1, 3.0, 500, t_from=1.0)
    assert gaps.max() <= 0.1 * math.exp(-1.0) * (1 + 1e-9)
