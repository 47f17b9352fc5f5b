"""Command-line entry point: ``bgp-blindspot {generate,train,score,evaluate}``.

Exit codes: 0 success, 1 invalid input or config, 2 I/O error, 3 training
diverged.  Seed precedence is ``--seed`` flag, then the ``BGPBS_SEED``
environment variable, then the config file.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .autoencoder import TrainConfig
from .dataset import load_series, save_series
from .errors import BlindspotError, StageError, TrainingDivergedError
from .evaluation import (
    DEFAULT_VOLUME_FEATURES,
    ExperimentConfig,
    ModelBundle,
    emit_report,
    fit_models,
    run_experiment,
)
from .synthgen import SuiteConfig, make_scenario_suite

log = logging.getLogger("bgp_blindspot")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_DIVERGED = 3

SEED_ENV = "BGPBS_SEED"


def _resolve_seed(flag: int | None) -> int | None:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return None
    try:
        return int(env)
    except ValueError:
        raise BlindspotError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _read_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BlindspotError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise BlindspotError(f"{path}: config must be a JSON object")
    return doc


def _experiment_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_dict(_read_json(args.config)) if args.config else ExperimentConfig()
    seed = _resolve_seed(args.seed)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    overrides = {}
    for name in ("window", "stride", "percentile"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if args.heartbeat_k is not None:
        overrides["heartbeat_k"] = args.heartbeat_k
    if args.heartbeat_n is not None:
        overrides["heartbeat_n"] = args.heartbeat_n
    if args.epochs is not None:
        overrides["train"] = replace(cfg.train, epochs=args.epochs)
    return replace(cfg, **overrides) if overrides else cfg


def cmd_generate(args) -> int:
    doc = _read_json(args.config) if args.config else {}
    if "suite" in doc:
        suite = ExperimentConfig.from_dict(doc).suite
    else:
        suite = SuiteConfig.from_dict(doc)
    seed = _resolve_seed(args.seed)
    if seed is not None:
        suite = suite.with_seed(seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, series in make_scenario_suite(suite).items():
        save_series(series, out / f"{name}.csv")
        log.info("wrote %s (%d bins)", out / f"{name}.csv", len(series))
    return EXIT_OK


def cmd_train(args) -> int:
    train_series = load_series(args.train)
    val_series = load_series(args.val, expected_schema=train_series.schema)
    seed = _resolve_seed(args.seed)
    tc = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        hidden=args.hidden,
        seed=0 if seed is None else seed,
    )
    bundle = fit_models(
        train_series,
        val_series,
        window=args.window,
        stride=args.stride,
        train_config=tc,
        percentile=args.percentile,
        volume_features=args.volume_features.split(","),
        heartbeat_k=args.heartbeat_k,
        heartbeat_n=args.heartbeat_n,
    )
    bundle.save(args.out)
    log.info(
        "trained on %d bins; threshold %.6g; final loss %.6g",
        len(train_series), bundle.threshold.value, bundle.training.epoch_losses[-1],
    )
    return EXIT_OK


def cmd_score(args) -> int:
    bundle = ModelBundle.load(args.model)
    series = load_series(args.data)
    result = bundle.score(series)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start_bin", "error", "flagged", "label", "type2_flag", "verdict"])
        for s, e, f, lab, t2, v in zip(
            result.start_bins, result.errors, result.recon_flags, result.labels,
            result.type2_flags, result.verdicts,
        ):
            w.writerow([int(s), repr(float(e)), int(f), int(lab), int(t2), v])
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _experiment_config(args)
    report = run_experiment(cfg)
    emit_report(report, args.out)
    for name, result in report.scenarios.items():
        for det, m in result.metrics().items():
            r = m.recall
            log.info("%-14s %-9s recall=%s", name, det, "n/a" if r is None else f"{r:.4f}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # argparse uses 2 for usage errors, which is reserved for I/O failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bgp-blindspot", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write the five-scenario synthetic suite as CSVs")
    g.add_argument("--config", help="suite or experiment config JSON (defaults if omitted)")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit standardizer, autoencoder, threshold and heartbeat")
    t.add_argument("--train", required=True, help="benign training CSV")
    t.add_argument("--val", required=True, help="benign validation CSV (threshold calibration)")
    t.add_argument("--out", required=True, help="model JSON to write")
    t.add_argument("--window", type=int, default=8)
    t.add_argument("--stride", type=int, default=1)
    t.add_argument("--percentile", type=float, default=99.0)
    t.add_argument("--heartbeat-k", type=float, default=3.0)
    t.add_argument("--heartbeat-n", type=int, default=3)
    t.add_argument("--volume-features", default=",".join(DEFAULT_VOLUME_FEATURES),
                   help="comma-separated feature names summed into update volume")
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--learning-rate", type=float, default=1e-3)
    t.add_argument("--hidden", type=int, default=32)
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("score", help="score one series with a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True, help="per-window scores CSV")
    s.set_defaults(func=cmd_score)

    e = sub.add_parser("evaluate", help="run the full experiment and write a report directory")
    e.add_argument("--config", help="experiment config JSON (defaults if omitted)")
    e.add_argument("--out", required=True, help="report directory")
    e.add_argument("--seed", type=int)
    e.add_argument("--window", type=int)
    e.add_argument("--stride", type=int)
    e.add_argument("--percentile", type=float)
    e.add_argument("--heartbeat-k", type=float)
    e.add_argument("--heartbeat-n", type=int)
    e.add_argument("--epochs", type=int)
    e.set_defaults(func=cmd_evaluate)
    return p


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return _exit_code(exc.cause)
    if isinstance(exc, TrainingDivergedError):
        return EXIT_DIVERGED
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_INVALID


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (BlindspotError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
