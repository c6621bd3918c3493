"""Experiment configuration and runners behind the command-line tool.

A configuration is an INI file with four sections::

    [experiment]
    name = ftle            ; path attractor lyapunov ftle spectrum density
                           ; smallball ergodicity vicinity
    n_paths = 1000
    seed = 12345

    [model]
    beta = 1.0
    sigma = 0.5

    [noise]
    alpha = 1.5
    mode = truncated       ; or nontruncated
    small_jump_cutoff = 0.01

    [numerics]
    dt = 0.001
    T = 1.0

Every key is optional except ``experiment.name``; unknown sections or keys
are rejected.  See ``NUMERIC_DEFAULTS`` for the numerics keys.
"""

from __future__ import annotations

import configparser
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _io
from .errors import ParameterError

EXPERIMENTS = ("path", "attractor", "lyapunov", "ftle", "spectrum", "density",
               "smallball", "ergodicity", "vicinity")
SEED_ENV = "LEVYPITCHFORK_SEED"


def _floats(text):
    vals = [float(v) for v in str(text).replace(" ", "").split(",") if v != ""]
    if not vals:
        raise ValueError("empty list")
    return tuple(vals)


def _pos(x):
    if not x > 0:
        raise ValueError("must be positive")
    return x


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise ValueError("must be a positive integer")
    return v


# key -> (parser, default); per-experiment overrides below
NUMERIC_DEFAULTS = {
    "dt": (lambda s: _pos(float(s)), 1e-3),
    "T": (lambda s: _pos(float(s)), 1.0),
    "x0": (float, 0.0),
    "pullback_T": (lambda s: _pos(float(s)), 50.0),
    "tol": (lambda s: _pos(float(s)), 1e-8),
    "T_max": (lambda s: _pos(float(s)), 800.0),
    "T_list": (_floats, (0.5, 1.0, 2.0)),
    "eps_list": (_floats, (0.5, 0.75, 1.0)),
    "t_checkpoints": (_floats, tuple(np.round(np.arange(0, 5.01, 0.5), 10))),
    "burn_in": (lambda s: float(s), 10.0),
    "n_batches": (_pos_int, 20),
    "L": (lambda s: _pos(float(s)), 8.0),
    "n_points": (_pos_int, 4096),
    "method": (str, "auto"),
}
EXPERIMENT_DEFAULTS = {
    "path": {"T": 10.0},
    "lyapunov": {"T": 1e4},
    "ergodicity": {"x0": 5.0},
    "vicinity": {"eps_list": (0.5,), "T_list": (1.0,)},
}


class ConfigError(ParameterError):
    """Invalid configuration; ``problems`` lists (field, message) pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.problems))


@dataclass
class ExperimentConfig:
    experiment: str
    model: object
    noise: object
    numerics: dict
    n_paths: int = 1000
    seed: int = 0
    output_dir: str | None = None
    source: dict = field(default_factory=dict)

    def echo(self) -> str:
        lines = []
        for sec, kv in self.source.items():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in kv.items()]
        return "\n".join(lines)

    def with_value(self, key: str, value) -> "ExperimentConfig":
        """Copy with one field replaced, re-validated from text."""
        src = {s: dict(kv) for s, kv in self.source.items()}
        sec = _section_of(key, src)
        src.setdefault(sec, {})[key.split(".")[-1]] = str(value)
        return parse_config(src, seed_env=False)


_SECTIONS = {
    "experiment": {"name", "n_paths", "seed", "output_dir"},
    "model": {"beta", "sigma"},
    "noise": {"alpha", "mode", "small_jump_cutoff"},
    "numerics": set(NUMERIC_DEFAULTS),
}


def _section_of(key, src=None):
    if "." in key:
        sec, k = key.split(".", 1)
        if sec in _SECTIONS and k in _SECTIONS[sec]:
            return sec
        raise ConfigError([(key, "unknown parameter")])
    hits = [s for s, keys in _SECTIONS.items() if key in keys]
    if not hits:
        raise ConfigError([(key, "unknown parameter")])
    return hits[0]


def load_config(path) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError([("file", str(exc))]) from None
    src = {s: dict(cp.items(s)) for s in cp.sections()}
    return parse_config(src)


def parse_config(src: dict, seed_env: bool = True) -> ExperimentConfig:
    """Validate a {section: {key: text}} mapping into an ExperimentConfig."""
    from .noise import NoiseConfig
    from .sde import ModelParams

    problems = []
    for sec, kv in src.items():
        if sec not in _SECTIONS:
            problems.append((sec, "unknown section"))
            continue
        for k in kv:
            if k not in _SECTIONS[sec]:
                problems.append((f"{sec}.{k}", "unknown key"))

    def get(sec, key, conv, default):
        text = src.get(sec, {}).get(key)
        if text is None:
            return default
        try:
            return conv(text)
        except (ValueError, TypeError) as exc:
            problems.append((f"{sec}.{key}", f"invalid value {text!r}: {exc}"))
            return default

    name = get("experiment", "name", str, None)
    if name is None:
        problems.append(("experiment.name", f"required; one of {', '.join(EXPERIMENTS)}"))
    elif name not in EXPERIMENTS:
        problems.append(("experiment.name", f"{name!r} is not one of {', '.join(EXPERIMENTS)}"))
    n_paths = get("experiment", "n_paths", _pos_int, 1000)
    seed = get("experiment", "seed", int, 0)
    if seed_env and os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            problems.append((SEED_ENV, "must be an integer"))
    if not 0 <= seed < 2**64:
        problems.append(("experiment.seed", "must be an unsigned 64-bit integer"))
    out = get("experiment", "output_dir", str, None)

    beta = get("model", "beta", float, 1.0)
    sigma = get("model", "sigma", float, 0.5)
    alpha = get("noise", "alpha", float, 1.5)
    mode = get("noise", "mode", str, "nontruncated")
    cutoff = get("noise", "small_jump_cutoff", float, 0.01)
    if not 1 < alpha < 2:
        problems.append(("noise.alpha", f"{alpha} outside the valid interval (1, 2)"))
    if mode not in ("truncated", "nontruncated"):
        problems.append(("noise.mode", f"{mode!r} must be truncated or nontruncated"))
    if not 0 < cutoff < 1:
        problems.append(("noise.small_jump_cutoff", f"{cutoff} outside (0, 1)"))
    if not (math.isfinite(sigma) and sigma >= 0):
        problems.append(("model.sigma", f"{sigma} must be finite and >= 0"))
    if not math.isfinite(beta):
        problems.append(("model.beta", "must be finite"))

    numerics = {}
    over = EXPERIMENT_DEFAULTS.get(name, {})
    for key, (conv, default) in NUMERIC_DEFAULTS.items():
        numerics[key] = get("numerics", key, conv, over.get(key, default))
    if numerics["method"] not in ("auto", "spectral", "kernel"):
        problems.append(("numerics.method", "must be auto, spectral or kernel"))
    if problems:
        raise ConfigError(problems)
    model = ModelParams(beta, sigma)
    noise = NoiseConfig(alpha, sigma, mode, cutoff, seed)
    return ExperimentConfig(name, model, noise, numerics, n_paths, seed, out,
                            {s: dict(kv) for s, kv in src.items()})


def derive_seed(seed: int, index: int) -> int:
    """Seed for the ``index``-th run of a sweep."""
    ss = np.random.SeedSequence(seed, spawn_key=(2**32 + int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class ReportBundle:
    experiment: str
    output_dir: Path
    files: list
    summary: dict
    wall_time: float = 0.0


def _settings(cfg):
    from .attractor import PullbackSettings
    n = cfg.numerics
    return PullbackSettings(T=n["pullback_T"], tol=n["tol"], T_max=n["T_max"],
                            dt=n["dt"])


def _run_path(cfg, out):
    from .noise import TimeGrid, sample_path
    from .sde import integrate
    n = cfg.numerics
    grid = TimeGrid.from_dt(0.0, n["T"], n["dt"])
    noise = sample_path(cfg.noise, grid)
    traj = integrate(cfg.model, noise, n["x0"])
    files = [noise.to_csv(out / "noise.csv"), traj.to_csv(out / "trajectory.csv")]
    return files, {"final_state": float(traj.states[-1])}


def _run_attractor(cfg, out):
    from .attractor import equilibrium_records
    rec = equilibrium_records(cfg.model, cfg.noise, cfg.n_paths, _settings(cfg))
    s = {"collapsed_fraction": float(rec.collapsed.mean()),
         "mean": float(rec.equilibrium.mean()),
         "second_moment": float(np.mean(rec.equilibrium ** 2)),
         "max_horizon": float(rec.horizon.max())}
    return [rec.to_csv(out / "ensemble.csv")], s


def _run_lyapunov(cfg, out):
    from .lyapunov import asymptotic_lyapunov
    n = cfg.numerics
    est = asymptotic_lyapunov(cfg.model, cfg.noise, n["T"], n["burn_in"], n["n_batches"],
                              settings=_settings(cfg))
    f = _io.write_csv(out / "batches.csv", ("batch", "lambda"),
                      (np.arange(est.batch_means.size), est.batch_means))
    return [f], {"estimate": est.estimate, "stderr": est.stderr,
                 "finite_time_only": int(est.finite_time_only)}


def _run_ftle(cfg, out):
    from .lyapunov import ftle_ensemble
    ens = ftle_ensemble(cfg.model, cfg.noise, cfg.numerics["T"], cfg.n_paths, _settings(cfg))
    return [ens.to_csv(out / "ftle.csv")], {
        "p_positive": ens.p_positive, "ci": ens.ci,
        "max_lambda": float(ens.values.max()), "mean_lambda": float(ens.values.mean())}


def _run_spectrum(cfg, out):
    from .lyapunov import dichotomy_spectrum_probe
    rep = dichotomy_spectrum_probe(cfg.model, cfg.noise, cfg.numerics["T_list"],
                                   cfg.n_paths, _settings(cfg))
    return [rep.to_csv(out / "spectrum.csv")], {
        "rate_max": float(rep.rate_max.max()), "rate_min": float(rep.rate_min.min())}


def _run_density(cfg, out):
    from .fokker_planck import (GridSpec, density_moment, lyapunov_from_density,
                                moment_bound, stationary_density)
    n = cfg.numerics
    d = stationary_density(cfg.model, cfg.noise, GridSpec(n["L"], n["n_points"]),
                           n["method"], tol=n["tol"])
    ld, lr = lyapunov_from_density(d, cfg.model.beta)
    files = [d.to_csv(out / "density.csv"), d.write_report(out / "solver_report.txt")]
    return files, {"lambda_direct": ld, "lambda_dirichlet": lr,
                   "second_moment": density_moment(d, 2),
                   "moment_bound": moment_bound(cfg.model.beta, cfg.model.sigma,
                                                cfg.noise.alpha)[0],
                   "min_log_p": d.min_log, "residual": d.residual_history[-1]}


def _run_smallball(cfg, out):
    from .noise import small_ball_table
    n = cfg.numerics
    tab = small_ball_table(cfg.noise, n["T_list"], n["eps_list"], cfg.n_paths)
    f = _io.write_csv(out / "smallball.csv", ("T", "epsilon", "estimate", "ci_halfwidth"),
                      (tab.T, tab.epsilon, tab.estimate, tab.ci_halfwidth))
    return [f], {"slope": tab.slope, "intercept": tab.intercept, "R2": tab.r2}


def _run_ergodicity(cfg, out):
    from .measures import EmpiricalMeasure, ergodicity_decay
    n = cfg.numerics
    rep = ergodicity_decay(cfg.model, cfg.noise, EmpiricalMeasure([n["x0"]]),
                           n["t_checkpoints"], cfg.n_paths, dt=n["dt"],
                           pullback_kw={"T": n["pullback_T"], "tol": n["tol"],
                                        "T_max": n["T_max"]})
    fit = out / "fit.txt"
    fit.write_text(rep.summary_line())
    return [rep.to_csv(out / "decay.csv"), fit], {
        "K": rep.K, "c": rep.c, "R2": rep.r2, "noise_floor": rep.noise_floor,
        "within_envelope": int(rep.within_envelope())}


def _run_vicinity(cfg, out):
    from .attractor import vicinity_table
    n = cfg.numerics
    est, ci = vicinity_table(cfg.model, cfg.noise, n["eps_list"], n["T_list"],
                             cfg.n_paths, _settings(cfg))
    E, T = np.meshgrid(n["eps_list"], n["T_list"], indexing="ij")
    f = _io.write_csv(out / "vicinity.csv", ("epsilon", "T", "estimate", "ci_halfwidth"),
                      (E.ravel(), T.ravel(), est.ravel(), ci.ravel()))
    return [f], {"estimate": float(est.ravel()[0]), "ci": float(ci.ravel()[0])}


RUNNERS = {
    "path": _run_path, "attractor": _run_attractor, "lyapunov": _run_lyapunov,
    "ftle": _run_ftle, "spectrum": _run_spectrum, "density": _run_density,
    "smallball": _run_smallball, "ergodicity": _run_ergodicity, "vicinity": _run_vicinity,
}


def _manifest(cfg, summary, wall, threads, extra=()):
    lines = [f"tool=levypitchfork", f"version={__version__}",
             f"experiment={cfg.experiment}", f"seed={cfg.seed}",
             f"threads={threads}", f"wall_time_s={wall:.3f}"]
    lines += [f"{k}={_io.fmt(v)}" for k, v in summary.items()]
    lines += list(extra)
    lines += ["", "# config", cfg.echo()]
    return "\n".join(lines) + "\n"


def run(cfg: ExperimentConfig, output_dir=None, threads=None) -> ReportBundle:
    """Run one experiment and write its CSVs plus ``manifest.txt``."""
    from .parallel import resolve_threads, set_default_threads
    out = Path(output_dir or cfg.output_dir or f"out_{cfg.experiment}")
    out.mkdir(parents=True, exist_ok=True)
    set_default_threads(threads)
    try:
        t0 = time.perf_counter()
        files, summary = RUNNERS[cfg.experiment](cfg, out)
        wall = time.perf_counter() - t0
    finally:
        set_default_threads(None)
    man = out / "manifest.txt"
    man.write_text(_manifest(cfg, summary, wall, resolve_threads(threads)))
    return ReportBundle(cfg.experiment, out, [*files, man], summary, wall)


def sweep(cfg: ExperimentConfig, parameter: str, values, output_dir=None,
          threads=None) -> ReportBundle:
    """Run the experiment once per value of ``parameter`` on derived seeds.

    Run i uses seed derive_seed(cfg.seed, i) and writes into ``run_<i>/``.
    A failing value is recorded in the combined ``sweep.csv`` and the sweep
    moves on.
    """
    values = list(values)
    if not values:
        raise ConfigError([("values", "empty list")])
    sec = _section_of(parameter)
    key = parameter.split(".")[-1]
    if key in ("name", "output_dir", "method", "mode"):
        raise ConfigError([(parameter, "not a numeric field")])
    try:
        [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError([("values", "sweep values must be numbers")]) from None
    out = Path(output_dir or cfg.output_dir or f"sweep_{cfg.experiment}")
    out.mkdir(parents=True, exist_ok=True)
    rows, names = [], []
    t0 = time.perf_counter()
    for i, v in enumerate(values):
        try:
            sub = cfg.with_value(f"{sec}.{key}", v)
            sub = sub.with_value("experiment.seed", derive_seed(cfg.seed, i))
            b = run(sub, out / f"run_{i}", threads)
            rows.append((v, "ok", b.summary))
            names += [k for k in b.summary if k not in names]
        except Exception as exc:  # recorded, never silently dropped
            rows.append((v, f"error: {type(exc).__name__}: {exc}".replace(",", ";")
                         .replace("\n", " "), {}))
    header = [key, "status", *names]
    lines = [",".join(header)]
    for v, status, s in rows:
        lines.append(",".join([_io.fmt(float(v)), status,
                               *[_io.fmt(s[k]) if k in s else "nan" for k in names]]))
    csv = out / "sweep.csv"
    csv.write_text("\n".join(lines) + "\n")
    wall = time.perf_counter() - t0
    summary = {"n_values": len(values),
               "n_failed": sum(1 for r in rows if r[1] != "ok")}
    man = out / "manifest.txt"
    man.write_text(_manifest(cfg, summary, wall, threads or "default",
                             [f"sweep_parameter={parameter}",
                              "sweep_values=" + ",".join(str(v) for v in values)]))
    return ReportBundle(cfg.experiment, out, [csv, man], summary, wall)
