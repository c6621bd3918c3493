"""Command-line entry point: ``levypitchfork run|sweep --config FILE``."""

import argparse
import sys
from pathlib import Path

from .errors import NonConvergenceError
from .experiments import ConfigError, load_config, run, sweep

EXIT_CONFIG, EXIT_FAILURE, EXIT_NONCONVERGENCE = 2, 1, 3


def _parser():
    p = argparse.ArgumentParser(prog="levypitchfork",
                                description="Levy-driven stochastic pitchfork experiments")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    s = sub.add_parser("sweep", help="run an experiment over values of one parameter")
    for q in (r, s):
        q.add_argument("--config", required=True, type=Path)
        q.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: logical cores)")
        q.add_argument("--out", type=Path, default=None, help="output directory")
    s.add_argument("--param", required=True, help="e.g. beta or model.beta")
    s.add_argument("--values", required=True, help="comma-separated list")
    return p


def _failure(out, text):
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "failure.txt").write_text(text)


def _glue_values(argv):
    # let "--values -1,0,1" through argparse, which would read -1,... as a flag
    argv = list(sys.argv[1:] if argv is None else argv)
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--values" and i + 1 < len(argv):
            out.append("--values=" + argv[i + 1])
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    args = _parser().parse_args(_glue_values(argv))
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out
    try:
        cfg = load_config(args.config)
        out = args.out or cfg.output_dir
        if args.command == "run":
            bundle = run(cfg, out, args.threads)
        else:
            values = [v for v in args.values.split(",") if v.strip() != ""]
            bundle = sweep(cfg, args.param, values, out, args.threads)
    except ConfigError as exc:
        for fld, msg in exc.problems:
            print(f"config error: {fld}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        hist = "\n".join(repr(r) for r in exc.residual_history)
        _failure(out, f"NonConvergenceError: {exc}\nresidual_history:\n{hist}\n")
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except Exception as exc:
        _failure(out, f"{type(exc).__name__}: {exc}\n")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    for k, v in bundle.summary.items():
        print(f"{k} = {v}")
    print(f"outputs in {bundle.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
