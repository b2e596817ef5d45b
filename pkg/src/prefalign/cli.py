"""Command-line entry points.

Exit codes: 0 success, 1 reproduce-study criterion failure, 2 input/parse
error, 3 degenerate dataset, 4 environment error (port in use, unwritable
directory). All subcommands are deterministic given --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .alignment import DegenerateDatasetError, accuracy, tac
from .core import DatasetError, LinearRewardModel
from .dataio import ParseError, format_ablation_table, load_preferences, load_trajectories
from .experiments import STUDIES, run_study
from .trainer import LossKind, OptimizerKind, TrainConfig, grid_search, train

EXIT_OK = 0
EXIT_CRITERION = 1
EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_ENVIRONMENT = 4


def _parse_weights(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")], dtype=float)
    except ValueError as exc:
        raise ParseError(f"bad --weights value {text!r}: {exc}") from exc


def _load_dataset(args):
    trajectories = None
    if getattr(args, "trajectories", None):
        trajectories, _, _ = load_trajectories(args.trajectories)
    return load_preferences(args.preferences, trajectories)


def cmd_tac(args) -> int:
    data = _load_dataset(args)
    model = LinearRewardModel(weights=_parse_weights(args.weights), gamma=args.gamma)
    rep = tac(data, model, args.tie_epsilon)
    acc = accuracy(data, model, args.tie_epsilon)
    if args.format == "json":
        payload = {
            "tac": rep.tac,
            "concordant": rep.concordant,
            "discordant": rep.discordant,
            "tied_only_induced": rep.tied_only_induced,
            "tied_only_human": rep.tied_only_human,
            "tied_both": rep.tied_both,
            "accuracy": acc,
        }
        if args.per_pair:
            payload["per_pair"] = [
                {
                    "left": rec.left,
                    "right": rec.right,
                    "label": rec.y,
                    "delta_return": ind.delta_return,
                    "induced": int(ind.verdict),
                    "classification": cls.value,
                }
                for rec, ind, cls in rep.per_pair
            ]
        text = json.dumps(payload, sort_keys=True, indent=2)
    else:
        text = (
            f"tac={rep.tac:.6f} P={rep.concordant} Q={rep.discordant} "
            f"X0={rep.tied_only_induced} Y0={rep.tied_only_human} "
            f"tied_both={rep.tied_both} accuracy={acc:.6f}"
        )
        if args.per_pair:
            rows = [
                f"{rec.left}\t{rec.right}\t{rec.y}\t{ind.delta_return:.6g}"
                f"\t{int(ind.verdict)}\t{cls.value}"
                for rec, ind, cls in rep.per_pair
            ]
            text += "\nleft\tright\tlabel\tdelta_return\tinduced\tclass\n" + "\n".join(rows)
    _emit(text, args.out)
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        loss_kind=LossKind(args.loss),
        alpha=args.alpha,
        learning_rate=args.lr,
        batch_size=args.batch,
        max_epochs=args.epochs,
        patience=args.patience,
        loss_delta=args.loss_delta,
        clip_low=args.clip_low,
        clip_high=args.clip_high,
        seed=args.seed,
        gamma=args.gamma,
        optimizer=OptimizerKind(args.optimizer),
        val_fraction=args.val_fraction,
    )


def cmd_train(args) -> int:
    data = _load_dataset(args)
    config = _train_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    grid_table = None
    if args.grid_lr or args.grid_batch:
        lrs = [float(x) for x in args.grid_lr.split(",")] if args.grid_lr else [config.learning_rate]
        batches = [int(x) for x in args.grid_batch.split(",")] if args.grid_batch else [config.batch_size]
        result = grid_search(data, lrs, batches, config)
        run = result.best
        cell = {"learning_rate": result.best_cell[0], "batch_size": result.best_cell[1]}
        rows = ["learning_rate\tbatch_size\ttac\taccuracy\tloss\tstatus"]
        for c in result.cells:
            if c.run is not None:
                rows.append(
                    f"{c.learning_rate:.6g}\t{c.batch_size}\t{c.run.best.tac:.6g}"
                    f"\t{c.run.best.accuracy:.6g}\t{c.run.best.loss:.6g}\tok"
                )
            else:
                rows.append(f"{c.learning_rate:.6g}\t{c.batch_size}\t-\t-\t-\tfailed: {c.error}")
        grid_table = "\n".join(rows) + "\n"
    else:
        run = train(data, config)
        cell = {"learning_rate": config.learning_rate, "batch_size": config.batch_size}

    summary = {
        "weights": run.final_weights.tolist(),
        "tac": run.best.tac,
        "accuracy": run.best.accuracy,
        "loss": run.best.loss,
        "stopped_at_epoch": run.stopped_at_epoch,
        "stop_reason": run.stop_reason.value,
        "chosen_cell": cell,
        "loss_kind": run.config.loss_kind.value,
        "seed": run.config.seed,
    }
    (out_dir / "weights.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    trace_rows = ["epoch\ttac\taccuracy\tloss"]
    trace_rows += [
        f"{k}\t{e.tac:.6g}\t{e.accuracy:.6g}\t{e.loss:.6g}"
        for k, e in enumerate(run.epoch_trace, start=1)
    ]
    (out_dir / "trace.tsv").write_text("\n".join(trace_rows) + "\n", encoding="utf-8")
    if grid_table is not None:
        (out_dir / "grid.tsv").write_text(grid_table, encoding="utf-8")
    print(f"best tac={run.best.tac:.6f} accuracy={run.best.accuracy:.6f} "
          f"loss={run.best.loss:.6g} -> {out_dir}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.study not in STUDIES:
        print(
            f"unknown study {args.study!r}; valid: {', '.join(sorted(STUDIES))}",
            file=sys.stderr,
        )
        return EXIT_INPUT
    report = run_study(args.study)
    print("\n".join(report.lines()))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, table in report.tables.items():
            (out_dir / f"{name}.tsv").write_text(table.rstrip("\n") + "\n", encoding="utf-8")
        (out_dir / "checks.json").write_text(
            json.dumps(
                [c.__dict__ for c in report.checks], sort_keys=True, indent=2
            )
            + "\n",
            encoding="utf-8",
        )
    return EXIT_OK if report.passed else EXIT_CRITERION


def cmd_serve(args) -> int:
    import uvicorn

    from .httpapi import create_app
    from .service import SessionStore

    data_dir = Path(args.data_dir)
    try:
        data_dir.mkdir(parents=True, exist_ok=True)
        probe = data_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"data directory not writable: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    store = SessionStore(data_dir)
    app = create_app(store)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit as exc:  # uvicorn exits non-zero when the port is taken
        if exc.code not in (0, None):
            print(f"server failed to start (port {args.port} in use?)", file=sys.stderr)
            return EXIT_ENVIRONMENT
    except OSError as exc:
        print(f"server failed to start: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    return EXIT_OK


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prefalign")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tac", help="score a weight vector against a preference file")
    p.add_argument("--preferences", required=True)
    p.add_argument("--trajectories", help="override the trajectory file referenced by the header")
    p.add_argument("--weights", required=True, help="comma-separated weight vector")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--tie-epsilon", type=float, default=0.0)
    p.add_argument("--per-pair", action="store_true")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_tac)

    p = sub.add_parser("train", help="learn weights from a preference file")
    p.add_argument("--preferences", required=True)
    p.add_argument("--trajectories")
    p.add_argument("--loss", choices=[k.value for k in LossKind], default="soft-tac")
    p.add_argument("--optimizer", choices=[k.value for k in OptimizerKind], default="adam")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--patience", type=int, default=50)
    p.add_argument("--loss-delta", type=float, default=1e-4)
    p.add_argument("--clip-low", type=float, default=None)
    p.add_argument("--clip-high", type=float, default=None)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-fraction", type=float, default=0.0)
    p.add_argument("--grid-lr", help="comma-separated learning-rate sweep")
    p.add_argument("--grid-batch", help="comma-separated batch-size sweep")
    p.add_argument("--out", required=True, help="output directory for artifacts")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("reproduce", help="run a named study against its thresholds")
    p.add_argument("study")
    p.add_argument("--out", help="directory for raw tables")
    p.set_defaults(fn=cmd_reproduce)

    p = sub.add_parser("serve", help="start the tuning service")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, DatasetError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateDatasetError as exc:
        print(f"degenerate dataset: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
