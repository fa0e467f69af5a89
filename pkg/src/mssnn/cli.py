"""Command line entry point.

::

    mssnn train    --config exp.toml [--seed N] [--out DIR] [--threads N]
    mssnn eval     --config exp.toml --checkpoint DIR/checkpoint.params [--out DIR]
    mssnn bounds   --p-error 0.25 [--max-votes 50] [--out DIR]
    mssnn gen-data [--config exp.toml] [--seed N] [--out DIR]

Exit status is 0 on success, 2 for configuration errors and 3 for data errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config, make_config
from .harness import (DataError, classification_data, evaluate, load_checkpoint,
                      memorization_example, save_checkpoint, train)
from .inference import exact_majority_error, hoeffding_bound
from .raster import SpikeRaster, save_raster, synth_pattern

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _config(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.config is None:
        return make_config(overrides)
    return load_config(args.config, overrides)


def _executor(threads: int):
    if threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {threads}")
    return ThreadPoolExecutor(threads) if threads > 1 else nullcontext()


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    cfg = _config(args)
    with _executor(args.threads) as pool:
        report, params, net = train(cfg, pool)
    out = _out(args)
    (out / "report.csv").write_bytes(report.to_csv())
    save_checkpoint(params, net, out / "checkpoint.params")
    last = report.rows[-1]
    print(f"steps={last.step} log_loss={last.log_loss!r} -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    if args.votes is not None:
        cfg = cfg.replace(num_votes=args.votes)
    params, net = load_checkpoint(args.checkpoint)
    with _executor(args.threads) as pool:
        result = evaluate(params, net, cfg, pool)
    out = _out(args)
    (out / "metrics.json").write_text(json.dumps(result, indent=2) + "\n")
    print(f"log_loss={result['log_loss']!r}"
          + (f" accuracy={result['accuracy']!r}" if "accuracy" in result else ""))
    return EXIT_OK


def bounds_rows(p_error: float, max_votes: int) -> list[tuple[int, float, float]]:
    """``(K, exact majority error, Hoeffding bound)`` for ``K = 1..max_votes``."""
    if max_votes < 1:
        raise ConfigError(f"--max-votes must be >= 1, got {max_votes}")
    try:
        return [(k, exact_majority_error(p_error, k), hoeffding_bound(p_error, k))
                for k in range(1, max_votes + 1)]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_bounds(args) -> int:
    rows = bounds_rows(args.p_error, args.max_votes)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("num_votes", "exact_error", "hoeffding_bound"))
    writer.writerows((k, repr(e), repr(b)) for k, e, b in rows)
    if args.out is None:
        sys.stdout.write(buf.getvalue())
    else:
        (_out(args) / "bounds.csv").write_text(buf.getvalue())
    return EXIT_OK


def cmd_gen_data(args) -> int:
    """Write the synthetic data a config would otherwise generate in memory."""
    out = _out(args)
    if args.config is None:
        # Stand-alone pattern from flags.
        try:
            raster = synth_pattern(args.seed or 0, args.neurons, args.horizon, args.rate)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        save_raster(raster, out / "pattern.sras")
        return EXIT_OK
    cfg = _config(args)
    if args.seed is not None:
        cfg = cfg.replace(data_seed=args.seed)
    if cfg.task == "memorize":
        ex = memorization_example(cfg)
        save_raster(ex.input, out / "input.sras")
        save_raster(ex.target, out / "target.sras")
        save_raster(SpikeRaster(np.vstack([ex.input.spikes, ex.target.spikes])),
                    out / "pattern.sras")
        return EXIT_OK
    train_set, test_set = classification_data(cfg)
    for name, data in (("train", train_set), ("test", test_set)):
        lines = []
        for i, ex in enumerate(data):
            fname = f"{name}_{i:05d}.sras"
            save_raster(ex.input, out / fname)
            lines.append(f"{ex.label} {fname}")
        (out / f"{name}.manifest").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mssnn", description="Train and evaluate multi-sample GLM spiking networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default: Optional[str] = "run"):
        p.add_argument("--config", type=Path, help="flat TOML experiment file")
        p.add_argument("--seed", type=int, help="override the seed in the config")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for per-sample draws")

    p = sub.add_parser("train", help="train and write report.csv and checkpoint.params")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint and write metrics.json")
    common(p)
    p.add_argument("--checkpoint", type=Path, required=True, help="parameter file from train")
    p.add_argument("--votes", type=int, help="override num_votes")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bounds", help="exact majority error against the Hoeffding bound")
    p.add_argument("--p-error", type=float, required=True,
                   help="error rate of a single vote, below 0.5")
    p.add_argument("--max-votes", type=int, default=50, help="largest vote count listed")
    p.add_argument("--out", default=None, help="directory for bounds.csv (default stdout)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("gen-data", help="write synthetic spike rasters")
    common(p, out_default="data")
    p.add_argument("--neurons", type=int, default=16, help="rows of the pattern (no config)")
    p.add_argument("--horizon", type=int, default=40, help="time steps (no config)")
    p.add_argument("--rate", type=float, default=0.3, help="spike probability (no config)")
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
