import math

import numpy as np
import pytest

from levypitchfork.attractor import PullbackSettings, pullback_attractor
from levypitchfork.errors import CollapseError, OutOfWindowError, ParameterError
from levypitchfork.fokker_planck import lambda_direct
from levypitchfork.lyapunov import (asymptotic_lyapunov, dichotomy_spectrum_probe,
                                    finite_time_lyapunov, ftle_distribution, ftle_ensemble)
from levypitchfork.noise import NoiseConfig, TimeGrid, sample_path, shift_path
from levypitchfork.sde import ModelParams, Trajectory, integrate, linearized_flow

TRUNC = NoiseConfig(1.5, 0.5, "truncated", seed=7)


def equilibrium_trajectory(params, cfg, T, T0=60.0, dt=1e-3):
    w = sample_path(cfg, TimeGrid.from_dt(-T0, T, dt))
    a0 = pullback_attractor(params, w, T0)
    fwd = sample_path(cfg, TimeGrid.from_dt(0.0, T, dt))
    return integrate(params, fwd, a0.equilibrium_estimate)


@pytest.mark.parametrize("beta", [-1.0, 0.0, 1.0])
def test_linear_surrogate_gives_beta(beta):
    est = asymptotic_lyapunov(ModelParams(beta, 0.5, cubic=False), TRUNC, 200.0)
    assert est.estimate == pytest.approx(beta, abs=1e-12)


@pytest.mark.parametrize("beta", [-1.0, 0.0, 1.0])
def test_truncated_exponent_negative(beta):
    est, se = asymptotic_lyapunov(ModelParams(beta, 0.5), TRUNC, 1e4)
    assert est + 3 * se < 0


def test_exponent_matches_density(heavy):
    est, se = asymptotic_lyapunov(ModelParams(1.0, 0.5), TRUNC, 1e4)
    lam = lambda_direct(heavy.density(1.0, "truncated"), 1.0)
    assert abs(est - lam) < 3 * se


def test_batch_halves_agree():
    r = asymptotic_lyapunov(ModelParams(-1.0, 0.5), TRUNC, 4000.0)
    (m1, s1), (m2, s2) = r.halves()
    assert abs(m1 - m2) < 3 * math.hypot(s1, s2)


def test_nontruncated_flagged():
    r = asymptotic_lyapunov(ModelParams(-1.0, 0.5), NoiseConfig(1.5, 0.5), 100.0)
    assert r.finite_time_only


@pytest.mark.parametrize("sigma", [0.5, 0.75, 1.0])
@pytest.mark.parametrize("beta", [-1.0, 1.0])
def test_sign_stays_negative_with_sigma(beta, sigma):
    cfg = NoiseConfig(1.5, sigma, "truncated", seed=8)
    est, se = asymptotic_lyapunov(ModelParams(beta, sigma), cfg, 2000.0)
    assert est < 0


def test_asymptotic_validation():
    m = ModelParams(1.0, 0.5)
    with pytest.raises(ParameterError):
        asymptotic_lyapunov(m, TRUNC, 5.0, burn_in=10.0)
    with pytest.raises(ParameterError):
        asymptotic_lyapunov(m, TRUNC, 100.0, n_batches=1)
    with pytest.raises(CollapseError):
        asymptotic_lyapunov(m, TRUNC, 100.0, settings=PullbackSettings(T=0.5, T_max=0.5))


def test_zero_equilibrium_gives_beta():
    g = TimeGrid(0.0, 2.0, 2000)
    m = ModelParams(0.7, 0.5)
    s = finite_time_lyapunov(m, Trajectory(g, np.zeros(2001), m), 2.0)
    assert s.value == pytest.approx(0.7, abs=1e-13)


@pytest.mark.parametrize("beta", [-1.0, 1.0])
def test_two_code_paths_agree(beta):
    m = ModelParams(beta, 0.5)
    tr = equilibrium_trajectory(m, NoiseConfig(1.5, 0.5, seed=9), 2.0)
    s = finite_time_lyapunov(m, tr, 2.0, omega_id=3)
    direct = math.log(linearized_flow(m, tr, tr.grid.index_of(2.0))) / 2.0
    assert s.value == pytest.approx(direct, rel=1e-12)
    assert s.omega_id == 3 and s.value <= beta


def test_window_too_short():
    m = ModelParams(1.0, 0.5)
    tr = equilibrium_trajectory(m, NoiseConfig(1.5, 0.5, seed=9), 1.0)
    with pytest.raises(OutOfWindowError):
        finite_time_lyapunov(m, tr, 2.0)
    with pytest.raises(ParameterError):
        finite_time_lyapunov(m, tr, 0.0)


def test_stable_case_all_below_beta():
    ens = ftle_ensemble(ModelParams(-1.0, 0.5), NoiseConfig(1.5, 0.5, seed=10), 1.0, 300)
    assert np.all(ens.values <= -1.0)


def test_ftle_dichotomy(heavy):
    neg, pos = heavy.ftle(-1.0), heavy.ftle(1.0)
    assert neg.p_positive == 0.0
    assert pos.p_positive - pos.ci > 0
    assert np.all(neg.values <= -1.0 + 1e-12) and np.all(pos.values <= 1.0 + 1e-12)


def test_ftle_in_vicinity(heavy):
    ens = heavy.ftle(1.0)
    near = ens.sup_abs < 0.5
    assert near.sum() > 0
    assert np.all(ens.values[near] >= 0.25)


def test_ftle_distribution_contract(tmp_path):
    m, cfg = ModelParams(1.0, 0.5), NoiseConfig(1.5, 0.5, seed=11)
    with pytest.raises(ParameterError):
        ftle_distribution(m, cfg, 1.0, 999)
    ens = ftle_ensemble(m, cfg, 1.0, 20)
    assert [s.omega_id for s in ens.samples()] == list(range(20))
    lines = ens.to_csv(tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "omega_id,T,lambda" and len(lines) == 21


def test_spectrum_upper_edge(heavy):
    rep = heavy.spectrum()
    lo, hi = rep.envelope(10_000)
    assert np.all(rep.rates <= rep.beta + 1e-12)
    assert rep.beta - 0.2 <= hi[0] <= rep.beta
    eps = 0.25
    cond = rep.max_rate_in_vicinity(eps, 10_000)
    assert np.isfinite(cond[0]) and cond[0] >= rep.beta - 3 * eps ** 2


def test_spectrum_lower_edge_unbounded(heavy):
    rep = heavy.spectrum()
    assert rep.envelope(1_000)[0][0] - rep.envelope(100_000)[0][0] > 1.0


def test_spectrum_report(tmp_path):
    rep = dichotomy_spectrum_probe(ModelParams(1.0, 0.5), NoiseConfig(1.5, 0.5, seed=12),
                                   [0.5, 1.0, 2.0], 50)
    assert rep.rates.shape == (50, 3)
    assert np.all(rep.rate_max <= 1.0)
    lines = rep.to_csv(tmp_path / "s.csv", 20).read_text().splitlines()
    assert lines[0] == "T,rate_min,rate_max,n_paths" and lines[1].endswith(",20")
    with pytest.raises(ParameterError):
        dichotomy_spectrum_probe(ModelParams(1.0, 0.5), NoiseConfig(), [1.0, 0.5], 10)
    with pytest.raises(ParameterError):
        rep.envelope(51)
