"""Downstream comparison harness: train disease classifiers with and
without generated augmentation images, evaluate on a held-out set, and
emit per-class accuracy tables with deltas against the baseline run."""

import csv
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .backbones import build_backbone
from .datakit import LabeledSample, LabeledSplit
from .errors import ConfigError
from .training import ClassifierConfig, fit_classifier, predict

log = logging.getLogger(__name__)

RUN_TAGS = ("baseline", "baseline+unmasked", "baseline+leafgan")


@dataclass(frozen=True)
class ClassResult:
    name: str
    test_count: int
    accuracy: float | None  # percent, None when the class has no test samples


@dataclass
class EvalReport:
    """Per-class accuracy table plus the unweighted average."""

    rows: list[ClassResult]
    run_tag: str = "baseline"

    def __post_init__(self):
        if self.run_tag not in RUN_TAGS:
            raise ValueError(f"run_tag must be one of {RUN_TAGS}, got {self.run_tag!r}")
        for r in self.rows:
            if r.accuracy is not None and not 0.0 <= r.accuracy <= 100.0:
                raise ValueError(f"accuracy out of [0, 100] for class {r.name}: {r.accuracy}")

    @property
    def class_names(self) -> list[str]:
        return [r.name for r in self.rows]

    @property
    def average(self) -> float:
        """Arithmetic mean over classes (not sample-weighted), two decimals."""
        scored = [r.accuracy for r in self.rows if r.accuracy is not None]
        if not scored:
            return float("nan")
        return round(float(np.mean(scored)), 2)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # K x K int64, rows are true classes
    class_names: list[str]

    def __post_init__(self):
        k = len(self.class_names)
        if self.counts.shape != (k, k) or (self.counts < 0).any():
            raise ValueError("confusion matrix must be K x K with nonnegative counts")

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def total(self) -> int:
        return int(self.counts.sum())

    def per_class_accuracy(self) -> list[float | None]:
        sums = self.row_sums()
        return [
            None if sums[i] == 0 else 100.0 * self.counts[i, i] / sums[i]
            for i in range(len(self.class_names))
        ]


@dataclass
class TrainedClassifier:
    model: nn.Module
    class_names: list[str]
    train_paths: set = field(default_factory=set)


def _vocab_indices(aug: LabeledSplit, vocabulary: list[str]) -> dict[int, int]:
    mapping = {}
    for label, name in enumerate(aug.class_names):
        if name not in vocabulary:
            raise ConfigError(
                f"augmentation class {name!r} not in classifier vocabulary {vocabulary}"
            )
        mapping[label] = vocabulary.index(name)
    return mapping


def train_classifier(
    train_set: LabeledSplit,
    augmentation_sets: list[LabeledSplit] | None = None,
    cfg: ClassifierConfig | None = None,
) -> TrainedClassifier:
    """Train a multiclass classifier on real images plus any generated
    augmentation sets; every augmentation sample joins with the label of
    its target disease domain."""
    if len(train_set.class_names) < 2:
        raise ConfigError("classifier needs at least two classes")
    cfg = cfg or ClassifierConfig(flip_augment=True)
    samples = list(train_set.train)
    for aug in augmentation_sets or []:
        remap = _vocab_indices(aug, train_set.class_names)
        samples.extend(
            LabeledSample(s.pixels, remap[s.label], s.path) for s in aug.train
        )
    model, _ = fit_classifier(samples, len(train_set.class_names), cfg)
    paths = {str(Path(s.path).resolve()) for s in samples if s.path is not None}
    return TrainedClassifier(model, list(train_set.class_names), paths)


def evaluate(
    clf: TrainedClassifier,
    test_set: LabeledSplit,
    run_tag: str = "baseline",
) -> tuple[ConfusionMatrix, EvalReport]:
    """Exact confusion counts and the Table-style per-class report.

    Test samples must be path-disjoint from the training data; classes
    with no test samples get an n/a row, excluded from the average.
    """
    if test_set.class_names != clf.class_names:
        raise ConfigError(
            f"test vocabulary {test_set.class_names} differs from classifier {clf.class_names}"
        )
    samples = test_set.train
    test_paths = {str(Path(s.path).resolve()) for s in samples if s.path is not None}
    overlap = test_paths & clf.train_paths
    if overlap:
        raise ConfigError(f"test set overlaps training data: {sorted(overlap)[:3]} ...")

    k = len(clf.class_names)
    counts = np.zeros((k, k), dtype=np.int64)
    if samples:
        preds = predict(clf.model, samples)
        for s, p in zip(samples, preds):
            counts[s.label, int(p)] += 1
    cm = ConfusionMatrix(counts, list(clf.class_names))

    rows = []
    for name, n, acc in zip(clf.class_names, cm.row_sums(), cm.per_class_accuracy()):
        if acc is None:
            warnings.warn(f"class {name!r} has no test samples; reported as n/a")
        rows.append(ClassResult(name, int(n), acc))
    return cm, EvalReport(rows, run_tag)


@dataclass
class Comparison:
    """Side-by-side accuracy table with average deltas against the first
    (baseline) report."""

    reports: list[EvalReport]

    def __post_init__(self):
        if len(self.reports) < 2:
            raise ConfigError("comparison needs at least two reports")
        vocab = self.reports[0].class_names
        for r in self.reports[1:]:
            if r.class_names != vocab:
                raise ConfigError(
                    f"report vocabularies differ: {vocab} vs {r.class_names}"
                )

    @property
    def deltas(self) -> list[float]:
        """Average-accuracy change of each non-baseline run vs the first."""
        base = self.reports[0].average
        return [round(r.average - base, 2) for r in self.reports[1:]]

    def rows(self) -> list[list]:
        header = ["class", "test_count"] + [r.run_tag for r in self.reports]
        out = [header]
        for i, name in enumerate(self.reports[0].class_names):
            row = [name, self.reports[0].rows[i].test_count]
            for r in self.reports:
                acc = r.rows[i].accuracy
                row.append("n/a" if acc is None else f"{acc:.1f}")
            out.append(row)
        out.append(["average", ""] + [f"{r.average:.2f}" for r in self.reports])
        out.append(["delta_vs_baseline", "", ""] + [f"{d:+.2f}" for d in self.deltas])
        return out

    def render_text(self) -> str:
        rows = [[str(c) for c in row] for row in self.rows()]
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines) + "\n"


def compare_runs(reports: list[EvalReport]) -> Comparison:
    return Comparison(reports)


def save_trained_classifier(
    clf: TrainedClassifier,
    directory: Path | str,
    backbone: str,
    input_side: int,
    stem: str = "eval",
) -> Path:
    """Versioned checkpoint carrying vocabulary and training provenance."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    version = 1
    while (directory / f"{stem}_v{version:03d}.pt").exists():
        version += 1
    path = directory / f"{stem}_v{version:03d}.pt"
    payload = {
        "backbone": backbone,
        "num_classes": len(clf.class_names),
        "input_side": input_side,
        "state_dict": clf.model.state_dict(),
        "class_names": list(clf.class_names),
        "train_paths": sorted(clf.train_paths),
    }
    tmp = path.with_suffix(".pt.tmp")
    torch.save(payload, tmp)
    tmp.replace(path)
    return path


def load_trained_classifier(path: Path | str) -> TrainedClassifier:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"classifier checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = build_backbone(payload["backbone"], payload["num_classes"], payload["input_side"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return TrainedClassifier(model, list(payload["class_names"]), set(payload["train_paths"]))


def write_report_csv(report: EvalReport, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "test_count", "accuracy_pct"])
        for r in report.rows:
            w.writerow([r.name, r.test_count, "n/a" if r.accuracy is None else f"{r.accuracy:.4f}"])
        w.writerow(["average", "", f"{report.average:.2f}"])
    return path


def write_comparison(comparison: Comparison, out_dir: Path | str, stem: str = "comparison") -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    with open(csv_path, "w", newline="") as fh:
        csv.writer(fh).writerows(comparison.rows())
    txt_path = out_dir / f"{stem}.txt"
    txt_path.write_text(comparison.render_text())
    return csv_path, txt_path
