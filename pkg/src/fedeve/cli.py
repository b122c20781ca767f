"""Command line entry point: ``run``, ``summarize``, ``plot`` and ``oracle-gd``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .client import DivergenceError
from .experiment import ConfigError, load_config, oracle_gd, plot_series, run_experiment, summarize

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fedeve", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None, help="output directory (default: runs/<config stem>-s<seed>)")
    run.add_argument("--workers", type=int, default=1)

    summ = sub.add_parser("summarize", help="mean ± std table over runs")
    summ.add_argument("glob")
    summ.add_argument("--out", required=True)

    plot = sub.add_parser("plot", help="SVG line chart of one metric")
    plot.add_argument("jsonl", nargs="+")
    plot.add_argument("--field", required=True)
    plot.add_argument("--out", required=True)

    gd = sub.add_parser("oracle-gd", help="centralised full-batch GD reference")
    gd.add_argument("--config", required=True)
    gd.add_argument("--out", default=None, help="write per-step JSONL here instead of stdout")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg = replace(cfg, seed=args.seed)
            out = args.out or str(Path("runs") / f"{Path(args.config).stem}-s{cfg.seed}")
            _, summary = run_experiment(cfg, out_dir=out, workers=args.workers)
            print(json.dumps(summary))
        elif args.command == "summarize":
            for row in summarize(args.glob, args.out):
                print(f"{row['method']},{row['alpha']},{row['acc']}")
        elif args.command == "plot":
            plot_series(args.jsonl, args.field, args.out)
        else:
            cfg = load_config(args.config)
            lines = [json.dumps({"t": t + 1, "w_norm2": float(w @ w)}) for t, w in enumerate(oracle_gd(cfg))]
            text = "\n".join(lines) + "\n"
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
