"""Command line entry point.

Subcommands:
  prepare    parse, impute, and split every configured asset; print a report
  train      train a single (asset, architecture) run
  evaluate   score an existing checkpoint against an asset's test set
  run        full experiment: every (asset x architecture) pair
  gradcheck  compare analytic gradients against finite differences
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiment
from .errors import ForecastError
from .metrics import evaluate
from .network import ArchSpec, CELL_KINDS, grad_check, init_params, load_checkpoint

log = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser, needs_config: bool = True):
    if needs_config:
        parser.add_argument("--config", required=True, help="experiment config path")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--out", default=None, help="override the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cryptoforecast",
        description="Config-driven recurrent-network price forecasting experiments.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest + split report")
    _add_common(p)

    p = sub.add_parser("train", help="train one (asset, architecture) run")
    _add_common(p)
    p.add_argument("--asset", required=True, help="asset symbol from the config")
    p.add_argument("--arch", required=True, choices=CELL_KINDS, help="cell kind")

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on an asset's test set")
    _add_common(p)
    p.add_argument("--asset", required=True, help="asset symbol from the config")
    p.add_argument("--checkpoint", required=True, help="checkpoint.json path")

    p = sub.add_parser("run", help="full experiment over every asset and architecture")
    _add_common(p)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    _add_common(p, needs_config=False)
    p.add_argument("--cell", choices=CELL_KINDS, default=None, help="restrict to one cell kind")
    p.add_argument("--trials", type=int, default=20, help="seeded trials per cell kind")
    p.add_argument("--max-hidden", type=int, default=8)
    p.add_argument("--max-window", type=int, default=10)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--threshold", type=float, default=1e-4)
    return parser


def _find_asset(config: experiment.ExperimentConfig, symbol: str) -> experiment.AssetSpec:
    for asset in config.assets:
        if asset.symbol == symbol:
            return asset
    known = ", ".join(a.symbol for a in config.assets)
    raise ForecastError(f"asset {symbol!r} is not in the config (known: {known})")


def cmd_prepare(args) -> int:
    config = experiment.load_config(args.config, seed=args.seed, out_dir=args.out)
    report = experiment.prepare_report(config)
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        experiment.write_json(out_dir / "prepare_report.json", report)
        print(out_dir / "prepare_report.json")
    else:
        print(json.dumps(report, sort_keys=True, indent=2))
    return 0


def cmd_train(args) -> int:
    config = experiment.load_config(args.config, seed=args.seed, out_dir=args.out)
    asset = _find_asset(config, args.asset)
    result = experiment.run_single(config, asset, args.arch)
    run_dir = Path(config.out_dir) / f"{asset.symbol}_{args.arch}"
    experiment.write_run_artifacts(config, result, run_dir)
    print(run_dir)
    return 0


def cmd_evaluate(args) -> int:
    config = experiment.load_config(args.config, seed=args.seed, out_dir=args.out)
    asset = _find_asset(config, args.asset)
    prepared = experiment.prepare_asset(config, asset)
    model = load_checkpoint(args.checkpoint)
    report = evaluate(model, prepared.test_windows, prepared.scaler, prepared.test_dates)
    payload = report.to_dict()
    payload["asset"] = asset.symbol
    payload["cell_kind"] = model.arch.cell_kind
    payload["scaler"] = {"min": prepared.scaler.min_value, "max": prepared.scaler.max_value}
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        experiment.write_json(out_dir / "eval_report.json", payload)
        (out_dir / "predictions.csv").write_text(report.pairs_csv())
        print(out_dir / "eval_report.json")
    else:
        print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


def cmd_run(args) -> int:
    config = experiment.load_config(args.config, seed=args.seed, out_dir=args.out)
    result = experiment.run_experiment(config)
    print(result.out_dir)
    if result.failures:
        for asset, kind, error in result.failures:
            print(f"FAILED {asset}/{kind}: {error}", file=sys.stderr)
        return 1
    return 0


def cmd_gradcheck(args) -> int:
    kinds = (args.cell,) if args.cell else CELL_KINDS
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    failed = False
    for kind in kinds:
        worst = 0.0
        for trial in range(args.trials):
            hidden = int(rng.integers(2, args.max_hidden + 1))
            window_len = int(rng.integers(3, args.max_window + 1))
            arch = ArchSpec(kind, layers=2, hidden_units=hidden)
            model = init_params(arch, seed=int(rng.integers(0, 2**31)))
            window = rng.uniform(0.0, 1.0, size=window_len)
            target = float(rng.uniform(0.0, 1.0))
            err = grad_check(model, window, target, epsilon=args.epsilon)
            worst = max(worst, err)
        status = "ok" if worst <= args.threshold else "FAIL"
        print(f"{kind}: worst relative error {worst:.3e} over {args.trials} trials [{status}]")
        failed = failed or worst > args.threshold
    return 1 if failed else 0


_COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "run": cmd_run,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except ForecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
