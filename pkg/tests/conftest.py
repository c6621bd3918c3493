import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class Heavy:
    """Large ensembles shared by module tests and the acceptance run."""

    def __init__(self):
        self._cache = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def ftle(self, beta, n=10_000, T=1.0):
        from levypitchfork.lyapunov import ftle_ensemble
        from levypitchfork.noise import NoiseConfig
        from levypitchfork.sde import ModelParams
        return self._get(("ftle", beta, n, T), lambda: ftle_ensemble(
            ModelParams(beta, 0.5), NoiseConfig(1.5, 0.5, seed=101), T, n))

    def spectrum(self, n=100_000):
        # coarse dt keeps 1e5 pullbacks affordable; the rate bound is exact at any dt
        from levypitchfork.attractor import PullbackSettings
        from levypitchfork.lyapunov import dichotomy_spectrum_probe
        from levypitchfork.noise import NoiseConfig
        from levypitchfork.sde import ModelParams
        return self._get(("spectrum", n), lambda: dichotomy_spectrum_probe(
            ModelParams(1.0, 0.5), NoiseConfig(1.5, 0.5, seed=102), [1.0], n,
            PullbackSettings(T=25, dt=1e-2)))

    def equilibria(self, mode, n=100_000):
        from levypitchfork.attractor import PullbackSettings, equilibrium_ensemble
        from levypitchfork.noise import NoiseConfig
        from levypitchfork.sde import ModelParams
        return self._get(("eq", mode, n), lambda: equilibrium_ensemble(
            ModelParams(1.0, 0.5), NoiseConfig(1.5, 0.5, mode, seed=103), n_paths=n,
            settings=PullbackSettings(T=25, dt=1e-2)))

    def density(self, beta, mode, sigma=0.5, alpha=1.5, n=4096):
        from levypitchfork.fokker_planck import GridSpec, stationary_density
        from levypitchfork.noise import NoiseConfig
        from levypitchfork.sde import ModelParams
        return self._get(("fp", beta, mode, sigma, alpha, n), lambda: stationary_density(
            ModelParams(beta, sigma), NoiseConfig(alpha, sigma, mode), GridSpec(8.0, n)))


_HEAVY = Heavy()


@pytest.fixture(scope="session")
def heavy():
    return _HEAVY


ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion():
    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
