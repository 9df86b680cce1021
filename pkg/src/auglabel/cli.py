"""Command-line entry points for label synthesis, training, and experiments."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, net
from .dataset import load_annotation_file
from .embeddings import load_embedding_file, synthetic_table
from .harness import ExperimentConfig, MethodSwitches
from .labelspace import build_attribute_space, synthesize_batch, write_continuous_csv


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seeds", type=_parse_int_list, help="override repetition seeds, e.g. 1,2,3")
    parser.add_argument("--methods", help="override method list, e.g. none,aug_label")
    parser.add_argument("--epochs", type=int, help="override SGD epochs")
    parser.add_argument("--learning-rate", type=float, help="override SGD learning rate")
    parser.add_argument("--batch-size", type=int, help="override SGD batch size")
    parser.add_argument("--alpha-grid", type=_parse_float_list, help="override alpha grid")
    parser.add_argument("--data-fraction", type=float, help="override training data fraction")


def _apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    if getattr(args, "seeds", None):
        config = replace(config, seeds=args.seeds)
    if getattr(args, "methods", None):
        methods = tuple(MethodSwitches.from_name(n.strip()) for n in args.methods.split(","))
        config = replace(config, methods=methods)
    sgd = config.sgd
    if getattr(args, "epochs", None) is not None:
        sgd = replace(sgd, epochs=args.epochs)
    if getattr(args, "learning_rate", None) is not None:
        sgd = replace(sgd, learning_rate=args.learning_rate)
    if getattr(args, "batch_size", None) is not None:
        sgd = replace(sgd, batch_size=args.batch_size)
    if sgd is not config.sgd:
        config = replace(config, sgd=sgd)
    if getattr(args, "alpha_grid", None):
        config = replace(config, alpha_grid=args.alpha_grid)
    if getattr(args, "data_fraction", None) is not None:
        config = replace(config, data_fraction=args.data_fraction)
    return config


def _cmd_synth_labels(args: argparse.Namespace) -> int:
    annotations = load_annotation_file(args.annotations, args.convention)
    if args.glove:
        table = load_embedding_file(args.glove)
    else:
        table = synthetic_table(annotations.names, args.dimension, args.embedding_seed)
    space = build_attribute_space(table, annotations.names)
    labels = synthesize_batch(space, annotations.y)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as handle:
        write_continuous_csv(labels, handle)
    print(f"wrote {len(labels)} continuous labels (d={space.d}) to {out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    config = _apply_overrides(ExperimentConfig.from_file(args.config), args)
    switches = MethodSwitches.from_name(args.method)
    cell, params = harness.run_single(
        config, switches, seed=args.seed, alpha=args.alpha, flip_rate=args.flip_rate
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "format_version": harness.REPORT_FORMAT_VERSION,
        "kind": "train",
        "config": config.to_dict(),
        "cell": harness._cell_to_dict(cell),
    }
    import json

    (out_dir / "train_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    net.save_checkpoint(params, out_dir / "checkpoint.json")
    print(
        f"method={cell.method} seed={cell.seed} alpha={cell.alpha:g} "
        f"test_mean_accuracy={cell.test_mean_accuracy:.4f}"
    )
    print(f"report and checkpoint written to {out_dir}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    config = _apply_overrides(ExperimentConfig.from_file(args.config), args)
    report = harness.run_comparison(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(harness.report_to_json(report), encoding="utf-8")
    table = harness.format_report_table(report)
    (out_dir / "report.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    failed = [c for c in report.cells if c.error is not None]
    for cell in failed:
        print(f"FAILED cell method={cell.method} seed={cell.seed}: {cell.error}", file=sys.stderr)
    print(f"report written to {out_dir}")
    return 1 if failed else 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _apply_overrides(ExperimentConfig.from_file(args.config), args)
    report = harness.run_fraction_sweep(config, args.fractions)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "sweep.json").write_text(harness.report_to_json(report), encoding="utf-8")
    csv_text = report.to_csv()
    (out_dir / "sweep.csv").write_text(csv_text, encoding="utf-8")
    print(csv_text, end="")
    failed = [c for c in report.cells if c.error is not None]
    for cell in failed:
        print(
            f"FAILED cell method={cell.method} seed={cell.seed} "
            f"fraction={cell.fraction}: {cell.error}",
            file=sys.stderr,
        )
    print(f"sweep written to {out_dir}")
    return 1 if failed else 0


def _cmd_check_gradients(args: argparse.Namespace) -> int:
    results = net.gradient_check_suite(
        n_shapes=args.shapes, points_per_shape=args.points, seed=args.seed
    )
    failures = 0
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        print(
            f"{status} {r['check']}: max relative error "
            f"{r['max_relative_error']:.3e} (tolerance {r['tolerance']:.0e})"
        )
        failures += 0 if r["passed"] else 1
    print(f"{len(results) - failures}/{len(results)} gradient checks passed")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auglabel",
        description="Synthesize continuous labels from categorical attributes and "
        "compare regularization methods on a dual-head classifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-labels", help="annotations + embeddings -> continuous-label CSV")
    p.add_argument("--annotations", required=True, help="annotation file (header + id rows)")
    p.add_argument("--convention", choices=("pm1", "01"), default="pm1")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--glove", help="GloVe-format embedding file")
    group.add_argument("--embedding-seed", type=int, help="seed for a synthetic embedding table")
    p.add_argument("--dimension", type=int, default=16, help="synthetic embedding dimension")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_synth_labels)

    p = sub.add_parser("train", help="single training run")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--method", default="none", help='e.g. "geo_aug+aug_label"')
    p.add_argument("--flip-rate", type=float, help="flip rate when disturb_label is active")
    _add_override_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("compare", help="run the method comparison grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    _add_override_flags(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sweep", help="accuracy vs training-data fraction")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument(
        "--fractions",
        type=_parse_float_list,
        default=(0.1, 0.2, 0.5, 1.0),
        help="comma-separated fractions in (0, 1]",
    )
    _add_override_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("check-gradients", help="finite-difference verification suite")
    p.add_argument("--shapes", type=int, default=20)
    p.add_argument("--points", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_check_gradients)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
