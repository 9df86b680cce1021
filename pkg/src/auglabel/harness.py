"""Experiment orchestration: method comparisons, alpha selection, fraction sweeps.

Every run in a report flows from declared seeds, so re-running a config file
reproduces the report byte for byte. Method cells share seeds (and therefore
data subsamples and parameter initializations), which makes the per-seed
accuracy differences paired comparisons.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import (
    AnnotationData,
    DatasetSplits,
    Split,
    SyntheticSpec,
    features_from_labels,
    generate_synthetic,
    load_annotation_file,
    subsample_fraction,
)
from .embeddings import EmbeddingTable, load_embedding_file, synthetic_table
from .labelspace import build_attribute_space, synthesize_batch
from .losses import JointLossConfig
from .metrics import mean_accuracy  # re-exported: the harness metric lives here
from .net import (
    ModelParams,
    NetworkShape,
    SgdConfig,
    TrainOptions,
    TrainTrace,
    evaluate,
    init_params,
    train,
)
from .regularizers import DisturbConfig

__all__ = [
    "MethodSwitches",
    "ExperimentConfig",
    "ExperimentReport",
    "SweepReport",
    "mean_accuracy",
    "select_alpha",
    "select_flip_rate",
    "run_comparison",
    "run_fraction_sweep",
    "run_single",
    "prepare_experiment",
    "default_config",
    "standard_method_grid",
    "report_to_json",
    "format_report_table",
]

REPORT_FORMAT_VERSION = 1

_METHOD_FIELDS = ("geo_aug", "dropout", "disturb_label", "aug_label")


@dataclass(frozen=True)
class MethodSwitches:
    """One row of the comparison grid: which techniques are active."""

    geo_aug: bool = False
    dropout: bool = False
    disturb_label: bool = False
    aug_label: bool = False

    @classmethod
    def from_name(cls, name: str) -> "MethodSwitches":
        if name == "none":
            return cls()
        flags = {}
        for token in name.split("+"):
            if token not in _METHOD_FIELDS:
                raise ValueError(f"unknown method component {token!r} in {name!r}")
            if token in flags:
                raise ValueError(f"repeated method component {token!r} in {name!r}")
            flags[token] = True
        return cls(**flags)

    def label(self) -> str:
        active = [f for f in _METHOD_FIELDS if getattr(self, f)]
        return "+".join(active) if active else "none"


def standard_method_grid() -> tuple[str, ...]:
    """The full comparison grid: single techniques, then combinations."""
    return (
        "none",
        "geo_aug",
        "dropout",
        "aug_label",
        "geo_aug+dropout",
        "geo_aug+aug_label",
        "geo_aug+dropout+aug_label",
        "geo_aug+disturb_label",
        "geo_aug+dropout+disturb_label",
        "geo_aug+disturb_label+aug_label",
    )


@dataclass(frozen=True)
class SyntheticEmbeddingSource:
    seed: int
    dimension: int


@dataclass(frozen=True)
class GloveSource:
    path: str


@dataclass(frozen=True)
class AnnotationSource:
    """Annotation files per split; inputs are synthesized from the labels."""

    train: str
    val: str
    test: str
    convention: str = "pm1"
    input_size: int = 64
    noise_std: float = 1.0
    feature_seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of a comparison or sweep experiment."""

    dataset: SyntheticSpec | AnnotationSource
    embeddings: SyntheticEmbeddingSource | GloveSource
    methods: tuple[MethodSwitches, ...]
    alpha_grid: tuple[float, ...]
    flip_grid: tuple[float, ...]
    sgd: SgdConfig
    seeds: tuple[int, ...]
    hidden_sizes: tuple[int, ...] = (32, 16)
    dropout_rate: float = 0.25
    crop: int | None = 6
    data_fraction: float = 1.0

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("at least one repetition seed required")
        if not self.methods:
            raise ValueError("at least one method required")
        if not self.alpha_grid or any(not 0.0 <= a <= 1.0 for a in self.alpha_grid):
            raise ValueError(f"alpha grid must be non-empty within [0, 1]: {self.alpha_grid}")
        if any(not 0.0 <= r < 1.0 for r in self.flip_grid):
            raise ValueError(f"flip grid entries must be in [0, 1): {self.flip_grid}")
        if not 0.0 < self.data_fraction <= 1.0:
            raise ValueError(f"data_fraction must be in (0, 1], got {self.data_fraction}")

    def to_dict(self) -> dict:
        if isinstance(self.dataset, SyntheticSpec):
            dataset = {
                "kind": "synthetic",
                "m": self.dataset.m,
                "groups": [list(g) for g in self.dataset.groups],
                "exclusive_pairs": [list(p) for p in self.dataset.exclusive_pairs],
                "n_train": self.dataset.n_train,
                "n_val": self.dataset.n_val,
                "n_test": self.dataset.n_test,
                "input_size": self.dataset.input_size,
                "noise_std": self.dataset.noise_std,
                "seed": self.dataset.seed,
            }
        else:
            dataset = {
                "kind": "annotations",
                "train": self.dataset.train,
                "val": self.dataset.val,
                "test": self.dataset.test,
                "convention": self.dataset.convention,
                "input_size": self.dataset.input_size,
                "noise_std": self.dataset.noise_std,
                "feature_seed": self.dataset.feature_seed,
            }
        if isinstance(self.embeddings, SyntheticEmbeddingSource):
            embeddings = {
                "kind": "synthetic",
                "seed": self.embeddings.seed,
                "dimension": self.embeddings.dimension,
            }
        else:
            embeddings = {"kind": "glove", "path": self.embeddings.path}
        return {
            "dataset": dataset,
            "embeddings": embeddings,
            "methods": [m.label() for m in self.methods],
            "alpha_grid": list(self.alpha_grid),
            "flip_grid": list(self.flip_grid),
            "sgd": {
                "learning_rate": self.sgd.learning_rate,
                "epochs": self.sgd.epochs,
                "batch_size": self.sgd.batch_size,
                "seed": self.sgd.seed,
            },
            "seeds": list(self.seeds),
            "hidden_sizes": list(self.hidden_sizes),
            "dropout_rate": self.dropout_rate,
            "crop": self.crop,
            "data_fraction": self.data_fraction,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        ds = payload["dataset"]
        if ds["kind"] == "synthetic":
            dataset: SyntheticSpec | AnnotationSource = SyntheticSpec(
                m=ds["m"],
                groups=tuple(tuple(g) for g in ds["groups"]),
                exclusive_pairs=tuple(tuple(p) for p in ds.get("exclusive_pairs", [])),
                n_train=ds["n_train"],
                n_val=ds["n_val"],
                n_test=ds["n_test"],
                input_size=ds["input_size"],
                noise_std=ds["noise_std"],
                seed=ds["seed"],
            )
        elif ds["kind"] == "annotations":
            dataset = AnnotationSource(
                train=ds["train"],
                val=ds["val"],
                test=ds["test"],
                convention=ds.get("convention", "pm1"),
                input_size=ds.get("input_size", 64),
                noise_std=ds.get("noise_std", 1.0),
                feature_seed=ds.get("feature_seed", 0),
            )
        else:
            raise ValueError(f"unknown dataset kind {ds['kind']!r}")
        emb = payload["embeddings"]
        if emb["kind"] == "synthetic":
            embeddings: SyntheticEmbeddingSource | GloveSource = SyntheticEmbeddingSource(
                seed=emb["seed"], dimension=emb["dimension"]
            )
        elif emb["kind"] == "glove":
            embeddings = GloveSource(path=emb["path"])
        else:
            raise ValueError(f"unknown embeddings kind {emb['kind']!r}")
        sgd = payload["sgd"]
        return cls(
            dataset=dataset,
            embeddings=embeddings,
            methods=tuple(MethodSwitches.from_name(n) for n in payload["methods"]),
            alpha_grid=tuple(payload["alpha_grid"]),
            flip_grid=tuple(payload.get("flip_grid", (0.05, 0.1, 0.2))),
            sgd=SgdConfig(
                learning_rate=sgd["learning_rate"],
                epochs=sgd["epochs"],
                batch_size=sgd["batch_size"],
                seed=sgd["seed"],
            ),
            seeds=tuple(payload["seeds"]),
            hidden_sizes=tuple(payload.get("hidden_sizes", (32, 16))),
            dropout_rate=payload.get("dropout_rate", 0.25),
            crop=payload.get("crop", 6),
            data_fraction=payload.get("data_fraction", 1.0),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def default_config(
    seeds: Sequence[int] = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10),
    methods: Sequence[str] = ("none", "aug_label"),
) -> ExperimentConfig:
    """Desk-scale defaults: 12 correlated attributes, 2000 train examples."""
    return ExperimentConfig(
        dataset=SyntheticSpec(
            m=12,
            groups=((0, 1, 2), (3, 4, 5), (6, 7, 8), (9, 10, 11)),
            exclusive_pairs=((4, 5),),
            n_train=2000,
            n_val=500,
            n_test=500,
            input_size=64,
            noise_std=2.0,
            seed=7,
        ),
        embeddings=SyntheticEmbeddingSource(seed=11, dimension=24),
        methods=tuple(MethodSwitches.from_name(n) for n in methods),
        alpha_grid=(0.3, 0.5, 0.7, 0.9, 1.0),
        flip_grid=(0.05, 0.1, 0.2),
        sgd=SgdConfig(learning_rate=0.1, epochs=40, batch_size=32, seed=0),
        seeds=tuple(seeds),
    )


@dataclass
class PreparedExperiment:
    """Materialized data and model shape shared by every cell of a run."""

    splits: DatasetSplits
    attribute_names: tuple[str, ...]
    table: EmbeddingTable
    shape: NetworkShape
    needs_z: bool


def _load_annotation_splits(source: AnnotationSource) -> tuple[DatasetSplits, tuple[str, ...]]:
    parsed: list[AnnotationData] = []
    for path in (source.train, source.val, source.test):
        parsed.append(load_annotation_file(path, source.convention))
    names = parsed[0].names
    for data, role in zip(parsed, ("train", "val", "test")):
        if data.names != names:
            raise ValueError(f"{role} annotation header differs from train header")
        if data.y.shape[0] == 0:
            raise ValueError(f"{role} annotation file has no rows")
    splits = []
    for offset, data in enumerate(parsed):
        x = features_from_labels(
            data.y, source.input_size, source.noise_std, source.feature_seed + offset
        )
        splits.append(Split(x=x, y=data.y))
    return DatasetSplits(*splits), names


def prepare_experiment(config: ExperimentConfig) -> PreparedExperiment:
    """Build splits, embeddings, continuous labels, and the network shape."""
    if isinstance(config.dataset, SyntheticSpec):
        splits = generate_synthetic(config.dataset)
        names = tuple(f"attr{j:02d}" for j in range(config.dataset.m))
        grid_pixels = config.dataset.input_size
    else:
        splits, names = _load_annotation_splits(config.dataset)
        grid_pixels = config.dataset.input_size
    if isinstance(config.embeddings, SyntheticEmbeddingSource):
        table = synthetic_table(names, config.embeddings.dimension, config.embeddings.seed)
    else:
        table = load_embedding_file(config.embeddings.path)
    needs_z = any(m.aug_label for m in config.methods)
    if needs_z:
        space = build_attribute_space(table, names)
        splits.train.z = np.stack(synthesize_batch(space, splits.train.y))
    input_features = config.crop * config.crop if config.crop else grid_pixels
    shape = NetworkShape(
        input_size=input_features,
        hidden_sizes=config.hidden_sizes,
        m=len(names),
        d=table.dimension,
        dropout_rate=config.dropout_rate,
    )
    return PreparedExperiment(
        splits=splits,
        attribute_names=names,
        table=table,
        shape=shape,
        needs_z=needs_z,
    )


@dataclass
class CellResult:
    method: str
    seed: int
    alpha: float
    flip_rate: float | None
    fraction: float
    test_mean_accuracy: float | None
    per_attribute: list[float] | None
    trace: TrainTrace | None
    error: str | None = None


def _train_options(config: ExperimentConfig, switches: MethodSwitches, flip_rate: float | None) -> TrainOptions:
    return TrainOptions(
        geo_aug=switches.geo_aug,
        dropout=switches.dropout,
        disturb=DisturbConfig(flip_rate) if switches.disturb_label else None,
        crop=config.crop,
    )


def _run_training(
    config: ExperimentConfig,
    prepared: PreparedExperiment,
    switches: MethodSwitches,
    seed: int,
    alpha: float,
    flip_rate: float | None,
    fraction: float,
) -> tuple[ModelParams, TrainTrace, float, np.ndarray]:
    train_split = subsample_fraction(prepared.splits.train, fraction, seed)
    params = init_params(prepared.shape, seed)
    params, trace = train(
        params,
        train_split,
        prepared.splits.val,
        JointLossConfig(alpha=alpha),
        replace(config.sgd, seed=seed),
        _train_options(config, switches, flip_rate),
    )
    test_acc, per_attr = evaluate(params, prepared.splits.test, config.crop)
    return params, trace, test_acc, per_attr


@dataclass
class AlphaSelection:
    alpha: float
    grid: tuple[float, ...]
    val_accuracies: tuple[float, ...]


@dataclass
class FlipSelection:
    flip_rate: float
    grid: tuple[float, ...]
    val_accuracies: tuple[float, ...]


def select_alpha(
    config: ExperimentConfig,
    train_split: Split,
    val_split: Split,
    switches: MethodSwitches = MethodSwitches(aug_label=True),
    shape: NetworkShape | None = None,
    flip_rate: float | None = None,
) -> AlphaSelection:
    """Pick the loss weight by validation accuracy over the configured grid.

    Trains one model per grid value (selection seed = ``config.sgd.seed``) and
    returns the alpha with the highest end-of-training validation mean
    accuracy; ties break toward the larger alpha (closer to the pure
    categorical loss).
    """
    if shape is None:
        if train_split.z is None:
            raise ValueError("train split has no continuous labels; synthesize z first")
        grid_pixels = train_split.x[0].size
        shape = NetworkShape(
            input_size=config.crop * config.crop if config.crop else grid_pixels,
            hidden_sizes=config.hidden_sizes,
            m=train_split.y.shape[1],
            d=train_split.z.shape[1],
            dropout_rate=config.dropout_rate,
        )
    accuracies = []
    best_alpha, best_acc = None, -1.0
    for alpha in config.alpha_grid:
        params = init_params(shape, config.sgd.seed)
        _, trace = train(
            params,
            train_split,
            val_split,
            JointLossConfig(alpha=alpha),
            config.sgd,
            _train_options(config, switches, flip_rate),
        )
        acc = trace.val_accuracy[-1]
        accuracies.append(acc)
        if acc > best_acc or (acc == best_acc and best_alpha is not None and alpha > best_alpha):
            best_alpha, best_acc = alpha, acc
    return AlphaSelection(
        alpha=best_alpha, grid=tuple(config.alpha_grid), val_accuracies=tuple(accuracies)
    )


def select_flip_rate(
    config: ExperimentConfig,
    train_split: Split,
    val_split: Split,
    switches: MethodSwitches,
    shape: NetworkShape,
) -> FlipSelection:
    """Pick the label-flip rate by validation accuracy; ties prefer less noise.

    Selection runs with alpha = 1 and the continuous head idle, so the flip
    rate is judged on the categorical task it perturbs.
    """
    probe = replace(switches, aug_label=False)
    accuracies = []
    best_rate, best_acc = None, -1.0
    for rate in config.flip_grid:
        params = init_params(shape, config.sgd.seed)
        _, trace = train(
            params,
            train_split,
            val_split,
            JointLossConfig(alpha=1.0),
            config.sgd,
            _train_options(config, probe, rate),
        )
        acc = trace.val_accuracy[-1]
        accuracies.append(acc)
        if acc > best_acc or (acc == best_acc and best_rate is not None and rate < best_rate):
            best_rate, best_acc = rate, acc
    return FlipSelection(
        flip_rate=best_rate, grid=tuple(config.flip_grid), val_accuracies=tuple(accuracies)
    )


@dataclass
class MethodSummary:
    method: str
    alpha: float
    flip_rate: float | None
    per_seed: list[float | None]
    mean_accuracy: float | None
    std_accuracy: float | None
    per_attribute_mean: list[float] | None
    alpha_selection: AlphaSelection | None
    flip_selection: FlipSelection | None


@dataclass
class PairedComparison:
    method: str
    baseline: str
    per_seed_diff: list[float]
    mean_improvement: float
    stderr: float


@dataclass
class ExperimentReport:
    config: dict
    cells: list[CellResult]
    methods: list[MethodSummary]
    baseline_method: str
    paired_vs_baseline: list[PairedComparison]
    format_version: int = REPORT_FORMAT_VERSION

    @property
    def has_failures(self) -> bool:
        return any(c.error is not None for c in self.cells)

    def method_summary(self, label: str) -> MethodSummary:
        for summary in self.methods:
            if summary.method == label:
                return summary
        raise KeyError(f"no method {label!r} in report")

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "kind": "comparison",
            "config": self.config,
            "baseline_method": self.baseline_method,
            "cells": [_cell_to_dict(c) for c in self.cells],
            "methods": [_summary_to_dict(s) for s in self.methods],
            "paired_vs_baseline": [
                {
                    "method": p.method,
                    "baseline": p.baseline,
                    "per_seed_diff": p.per_seed_diff,
                    "mean_improvement": p.mean_improvement,
                    "stderr": p.stderr,
                }
                for p in self.paired_vs_baseline
            ],
        }


def _cell_to_dict(cell: CellResult) -> dict:
    return {
        "method": cell.method,
        "seed": cell.seed,
        "alpha": cell.alpha,
        "flip_rate": cell.flip_rate,
        "fraction": cell.fraction,
        "test_mean_accuracy": cell.test_mean_accuracy,
        "per_attribute": cell.per_attribute,
        "trace": None
        if cell.trace is None
        else {"train_loss": cell.trace.train_loss, "val_accuracy": cell.trace.val_accuracy},
        "error": cell.error,
    }


def _summary_to_dict(summary: MethodSummary) -> dict:
    return {
        "method": summary.method,
        "alpha": summary.alpha,
        "flip_rate": summary.flip_rate,
        "per_seed": summary.per_seed,
        "mean_accuracy": summary.mean_accuracy,
        "std_accuracy": summary.std_accuracy,
        "per_attribute_mean": summary.per_attribute_mean,
        "alpha_selection": None
        if summary.alpha_selection is None
        else {
            "alpha": summary.alpha_selection.alpha,
            "grid": list(summary.alpha_selection.grid),
            "val_accuracies": list(summary.alpha_selection.val_accuracies),
        },
        "flip_selection": None
        if summary.flip_selection is None
        else {
            "flip_rate": summary.flip_selection.flip_rate,
            "grid": list(summary.flip_selection.grid),
            "val_accuracies": list(summary.flip_selection.val_accuracies),
        },
    }


def _aggregate(values: list[float | None]) -> tuple[float | None, float | None]:
    ok = [v for v in values if v is not None]
    if not ok:
        return None, None
    mean = float(np.mean(ok))
    std = float(np.std(ok, ddof=1)) if len(ok) > 1 else 0.0
    return mean, std


def _summarize_method(
    label: str,
    alpha: float,
    flip_rate: float | None,
    cells: list[CellResult],
    alpha_selection: AlphaSelection | None,
    flip_selection: FlipSelection | None,
) -> MethodSummary:
    per_seed = [c.test_mean_accuracy for c in cells]
    mean, std = _aggregate(per_seed)
    attr_rows = [c.per_attribute for c in cells if c.per_attribute is not None]
    per_attr = list(np.mean(attr_rows, axis=0)) if attr_rows else None
    return MethodSummary(
        method=label,
        alpha=alpha,
        flip_rate=flip_rate,
        per_seed=per_seed,
        mean_accuracy=mean,
        std_accuracy=std,
        per_attribute_mean=per_attr,
        alpha_selection=alpha_selection,
        flip_selection=flip_selection,
    )


def _method_cells(
    config: ExperimentConfig,
    prepared: PreparedExperiment,
    switches: MethodSwitches,
    fraction: float,
    selection_train: Split,
) -> tuple[list[CellResult], float, float | None, AlphaSelection | None, FlipSelection | None]:
    label = switches.label()
    flip_selection = None
    flip_rate = None
    if switches.disturb_label:
        if len(config.flip_grid) == 1:
            flip_rate = config.flip_grid[0]
        else:
            flip_selection = select_flip_rate(
                config, selection_train, prepared.splits.val, switches, prepared.shape
            )
            flip_rate = flip_selection.flip_rate
    alpha_selection = None
    alpha = 1.0
    if switches.aug_label:
        alpha_selection = select_alpha(
            config,
            selection_train,
            prepared.splits.val,
            switches,
            prepared.shape,
            flip_rate,
        )
        alpha = alpha_selection.alpha
    cells = []
    for seed in config.seeds:
        try:
            _, trace, acc, per_attr = _run_training(
                config, prepared, switches, seed, alpha, flip_rate, fraction
            )
            cells.append(
                CellResult(
                    method=label,
                    seed=seed,
                    alpha=alpha,
                    flip_rate=flip_rate,
                    fraction=fraction,
                    test_mean_accuracy=acc,
                    per_attribute=[float(v) for v in per_attr],
                    trace=trace,
                )
            )
        except Exception as exc:  # cell failures are recorded, the run continues
            cells.append(
                CellResult(
                    method=label,
                    seed=seed,
                    alpha=alpha,
                    flip_rate=flip_rate,
                    fraction=fraction,
                    test_mean_accuracy=None,
                    per_attribute=None,
                    trace=None,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return cells, alpha, flip_rate, alpha_selection, flip_selection


def run_comparison(config: ExperimentConfig) -> ExperimentReport:
    """Train and evaluate every configured method over the shared seed list.

    Per method: the flip rate and alpha are selected once on the validation
    split (when the method needs them), then one model per seed is trained on
    a per-seed subsample of ``data_fraction`` and scored on the test split.
    """
    prepared = prepare_experiment(config)
    selection_train = subsample_fraction(
        prepared.splits.train, config.data_fraction, config.sgd.seed
    )
    all_cells: list[CellResult] = []
    summaries: list[MethodSummary] = []
    for switches in config.methods:
        cells, alpha, flip_rate, alpha_sel, flip_sel = _method_cells(
            config, prepared, switches, config.data_fraction, selection_train
        )
        all_cells.extend(cells)
        summaries.append(
            _summarize_method(switches.label(), alpha, flip_rate, cells, alpha_sel, flip_sel)
        )
    labels = [s.method for s in summaries]
    baseline = "none" if "none" in labels else labels[0]
    baseline_cells = {c.seed: c for c in all_cells if c.method == baseline}
    paired = []
    for summary in summaries:
        if summary.method == baseline:
            continue
        diffs = []
        for cell in all_cells:
            if cell.method != summary.method or cell.test_mean_accuracy is None:
                continue
            base = baseline_cells.get(cell.seed)
            if base is None or base.test_mean_accuracy is None:
                continue
            diffs.append(cell.test_mean_accuracy - base.test_mean_accuracy)
        if not diffs:
            continue
        mean_diff = float(np.mean(diffs))
        stderr = (
            float(np.std(diffs, ddof=1) / np.sqrt(len(diffs))) if len(diffs) > 1 else 0.0
        )
        paired.append(
            PairedComparison(
                method=summary.method,
                baseline=baseline,
                per_seed_diff=diffs,
                mean_improvement=mean_diff,
                stderr=stderr,
            )
        )
    return ExperimentReport(
        config=config.to_dict(),
        cells=all_cells,
        methods=summaries,
        baseline_method=baseline,
        paired_vs_baseline=paired,
    )


@dataclass
class SweepRow:
    method: str
    fraction: float
    alpha: float
    flip_rate: float | None
    per_seed: list[float | None]
    mean_accuracy: float | None
    std_accuracy: float | None


@dataclass
class SweepReport:
    config: dict
    fractions: list[float]
    rows: list[SweepRow]
    cells: list[CellResult]
    format_version: int = REPORT_FORMAT_VERSION

    @property
    def has_failures(self) -> bool:
        return any(c.error is not None for c in self.cells)

    def row(self, method: str, fraction: float) -> SweepRow:
        for row in self.rows:
            if row.method == method and row.fraction == fraction:
                return row
        raise KeyError(f"no sweep row for {method!r} at fraction {fraction}")

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "kind": "fraction_sweep",
            "config": self.config,
            "fractions": self.fractions,
            "rows": [
                {
                    "method": r.method,
                    "fraction": r.fraction,
                    "alpha": r.alpha,
                    "flip_rate": r.flip_rate,
                    "per_seed": r.per_seed,
                    "mean_accuracy": r.mean_accuracy,
                    "std_accuracy": r.std_accuracy,
                }
                for r in self.rows
            ],
            "cells": [_cell_to_dict(c) for c in self.cells],
        }

    def to_csv(self) -> str:
        lines = ["method,fraction,mean_accuracy,std_accuracy"]
        for row in self.rows:
            mean = "" if row.mean_accuracy is None else repr(row.mean_accuracy)
            std = "" if row.std_accuracy is None else repr(row.std_accuracy)
            lines.append(f"{row.method},{row.fraction!r},{mean},{std}")
        return "\n".join(lines) + "\n"


def run_fraction_sweep(config: ExperimentConfig, fractions: Sequence[float]) -> SweepReport:
    """Accuracy versus train-set size for every configured method.

    Hyperparameters are re-selected per (method, fraction) on a selection
    subsample, then each seed trains on its own subsample of that fraction.
    """
    fractions = list(fractions)
    if not fractions or any(not 0.0 < f <= 1.0 for f in fractions):
        raise ValueError(f"fractions must be non-empty within (0, 1]: {fractions}")
    prepared = prepare_experiment(config)
    rows: list[SweepRow] = []
    all_cells: list[CellResult] = []
    for switches in config.methods:
        for fraction in fractions:
            selection_train = subsample_fraction(
                prepared.splits.train, fraction, config.sgd.seed
            )
            cells, alpha, flip_rate, _, _ = _method_cells(
                config, prepared, switches, fraction, selection_train
            )
            all_cells.extend(cells)
            per_seed = [c.test_mean_accuracy for c in cells]
            mean, std = _aggregate(per_seed)
            rows.append(
                SweepRow(
                    method=switches.label(),
                    fraction=fraction,
                    alpha=alpha,
                    flip_rate=flip_rate,
                    per_seed=per_seed,
                    mean_accuracy=mean,
                    std_accuracy=std,
                )
            )
    return SweepReport(
        config=config.to_dict(),
        fractions=fractions,
        rows=rows,
        cells=all_cells,
    )


def run_single(
    config: ExperimentConfig,
    switches: MethodSwitches,
    seed: int,
    alpha: float,
    flip_rate: float | None = None,
) -> tuple[CellResult, ModelParams]:
    """One train-and-evaluate cell with explicit hyperparameters."""
    needs_z = switches.aug_label or alpha < 1.0
    probe = config
    if needs_z and not any(m.aug_label for m in config.methods):
        probe = replace(config, methods=(MethodSwitches(aug_label=True),))
    prepared = prepare_experiment(probe)
    if switches.disturb_label and flip_rate is None:
        flip_rate = config.flip_grid[0]
    params, trace, acc, per_attr = _run_training(
        config, prepared, switches, seed, alpha, flip_rate, config.data_fraction
    )
    cell = CellResult(
        method=switches.label(),
        seed=seed,
        alpha=alpha,
        flip_rate=flip_rate,
        fraction=config.data_fraction,
        test_mean_accuracy=acc,
        per_attribute=[float(v) for v in per_attr],
        trace=trace,
    )
    return cell, params


def report_to_json(report: ExperimentReport | SweepReport) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def format_report_table(report: ExperimentReport) -> str:
    """Aligned text table of per-method accuracies."""
    header = ("method", "mean_acc", "std", "alpha", "flip_rate")
    rows = [header]
    for s in report.methods:
        rows.append(
            (
                s.method,
                "failed" if s.mean_accuracy is None else f"{s.mean_accuracy:.4f}",
                "" if s.std_accuracy is None else f"{s.std_accuracy:.4f}",
                f"{s.alpha:g}",
                "" if s.flip_rate is None else f"{s.flip_rate:g}",
            )
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    out = [lines[0], "-" * len(lines[0])] + lines[1:]
    for p in report.paired_vs_baseline:
        out.append(
            f"{p.method} vs {p.baseline}: improvement "
            f"{p.mean_improvement:+.4f} +/- {p.stderr:.4f} (stderr, paired seeds)"
        )
    return "\n".join(out) + "\n"
