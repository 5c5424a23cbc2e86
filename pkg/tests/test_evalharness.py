from pathlib import Path

import numpy as np
import pytest
import torch
import torch.nn as nn

from leafgan.datakit import LabeledSample, LabeledSplit
from leafgan.errors import ConfigError
from leafgan.evalharness import (
    ClassResult,
    Comparison,
    ConfusionMatrix,
    EvalReport,
    TrainedClassifier,
    compare_runs,
    evaluate,
    load_trained_classifier,
    save_trained_classifier,
    train_classifier,
    write_comparison,
    write_report_csv,
)
from leafgan.training import ClassifierConfig


def _report(values, tag="baseline", counts=None):
    names = ["healthy", "mysv", "brown_spot", "powdery_mildew"][: len(values)]
    counts = counts or [100] * len(values)
    rows = [ClassResult(n, c, v) for n, c, v in zip(names, counts, values)]
    return EvalReport(rows, tag)


class TestEvalReportArithmetic:
    def test_published_baseline_average(self):
        report = _report([85.1, 75.4, 62.8, 61.8], counts=[1046, 2034, 1220, 89])
        assert abs(report.average - 71.3) <= 0.05

    def test_published_masked_run_average(self):
        report = _report([84.6, 83.3, 75.9, 70.8], "baseline+leafgan")
        assert abs(report.average - 78.7) <= 0.05

    def test_unmasked_run_average(self):
        report = _report([84.7, 76.0, 65.4, 61.8], "baseline+unmasked")
        assert abs(report.average - 72.0) <= 0.05

    def test_average_recomputes_from_rows(self, rng):
        values = list(np.round(rng.uniform(0, 100, 5), 1))
        report = EvalReport([ClassResult(f"c{i}", 10, v) for i, v in enumerate(values)])
        assert abs(report.average - float(np.mean(values))) <= 0.05

    def test_accuracy_range_validated(self):
        with pytest.raises(ValueError):
            _report([101.0, 50.0, 50.0, 50.0])

    def test_run_tag_vocabulary(self):
        with pytest.raises(ValueError, match="run_tag"):
            _report([50.0], tag="experiment_7")


class TestCompareRuns:
    def test_published_deltas(self):
        comparison = compare_runs([
            _report([71.3], "baseline", [10]),
            _report([72.0], "baseline+unmasked", [10]),
            _report([78.7], "baseline+leafgan", [10]),
        ])
        assert comparison.deltas == [0.7, 7.4]

    def test_full_table_deltas_within_tolerance(self):
        comparison = compare_runs([
            _report([85.1, 75.4, 62.8, 61.8], "baseline"),
            _report([84.7, 76.0, 65.4, 61.8], "baseline+unmasked"),
            _report([84.6, 83.3, 75.9, 70.8], "baseline+leafgan"),
        ])
        assert abs(comparison.deltas[0] - 0.7) <= 0.05
        assert abs(comparison.deltas[1] - 7.4) <= 0.05

    def test_identical_reports_zero_delta(self):
        a = _report([60.0, 70.0, 80.0, 90.0])
        b = _report([60.0, 70.0, 80.0, 90.0], "baseline+unmasked")
        assert compare_runs([a, b]).deltas == [0.0]

    def test_antisymmetric_under_swap(self):
        a = _report([60.0, 70.0, 80.0, 90.0], "baseline")
        b = _report([65.0, 72.0, 81.0, 95.0], "baseline+leafgan")
        assert compare_runs([a, b]).deltas[0] == -compare_runs([b, a]).deltas[0]

    def test_vocabulary_mismatch_fatal(self):
        a = _report([60.0, 70.0])
        bad = EvalReport([ClassResult("x", 5, 50.0), ClassResult("y", 5, 50.0)], "baseline+unmasked")
        with pytest.raises(ConfigError, match="vocabularies"):
            compare_runs([a, bad])

    def test_needs_two_reports(self):
        with pytest.raises(ConfigError):
            compare_runs([_report([50.0])])

    def test_render_contains_table_cells(self, tmp_path):
        comparison = compare_runs([
            _report([71.3], "baseline", [9]),
            _report([78.7], "baseline+leafgan", [9]),
        ])
        text = comparison.render_text()
        assert "baseline+leafgan" in text and "+7.40" in text
        csv_path, txt_path = write_comparison(comparison, tmp_path)
        assert csv_path.read_text().startswith("class,test_count,baseline")
        assert txt_path.read_text() == text


class TestConfusionMatrix:
    def test_row_sums_and_total(self):
        counts = np.array([[5, 1], [2, 8]], dtype=np.int64)
        cm = ConfusionMatrix(counts, ["a", "b"])
        assert cm.row_sums().tolist() == [6, 10]
        assert cm.total() == 16
        accs = cm.per_class_accuracy()
        assert accs[0] == pytest.approx(100 * 5 / 6)

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionMatrix(np.array([[-1, 0], [0, 1]]), ["a", "b"])


class OracleNet(nn.Module):
    """Predicts the dominant color channel; exact on the color-blob toys."""

    def forward(self, x):
        return x.mean(dim=(2, 3))


def _blob_samples(n_per_class, side=12, seed=0, classes=3, path_prefix="s"):
    gen = np.random.default_rng(seed)
    means = [(0.9, 0.1, 0.1), (0.1, 0.9, 0.1), (0.1, 0.1, 0.9)][:classes]
    samples = []
    for label, mean in enumerate(means):
        for i in range(n_per_class):
            img = np.clip(gen.normal(mean, 0.05, (side, side, 3)), 0, 1).astype(np.float32)
            samples.append(LabeledSample(img, label, Path(f"/{path_prefix}/{label}/{i}.png")))
    return samples


def _split(samples, classes=3):
    return LabeledSplit([f"class_{k}" for k in range(classes)], train=samples)


class TestEvaluate:
    def test_oracle_classifier_scores_hundred_everywhere(self):
        clf = TrainedClassifier(OracleNet(), ["class_0", "class_1", "class_2"])
        cm, report = evaluate(clf, _split(_blob_samples(8)))
        assert cm.counts.trace() == 24
        assert all(r.accuracy == 100.0 for r in report.rows)
        assert report.average == 100.0

    def test_row_sums_equal_test_counts(self):
        clf = TrainedClassifier(OracleNet(), ["class_0", "class_1", "class_2"])
        test = _split(_blob_samples(5))
        cm, report = evaluate(clf, test)
        assert cm.row_sums().tolist() == [5, 5, 5]
        assert cm.total() == len(test.train)

    def test_empty_class_reported_na_and_excluded(self):
        clf = TrainedClassifier(OracleNet(), ["class_0", "class_1", "class_2"])
        samples = [s for s in _blob_samples(4) if s.label != 2]
        with pytest.warns(UserWarning, match="n/a"):
            _, report = evaluate(clf, _split(samples))
        assert report.rows[2].accuracy is None
        assert report.average == 100.0  # mean over the two scored classes

    def test_train_test_overlap_rejected(self):
        samples = _blob_samples(3)
        clf = TrainedClassifier(
            OracleNet(), ["class_0", "class_1", "class_2"],
            train_paths={str(samples[0].path.resolve())},
        )
        with pytest.raises(ConfigError, match="overlap"):
            evaluate(clf, _split(samples))

    def test_vocabulary_must_match(self):
        clf = TrainedClassifier(OracleNet(), ["x", "y", "z"])
        with pytest.raises(ConfigError, match="vocabulary"):
            evaluate(clf, _split(_blob_samples(2)))


FAST_CFG = ClassifierConfig(backbone="linear", input_side=12, epochs=15, batch_size=16,
                            flip_augment=True, seed=0)


class TestTrainClassifier:
    def test_baseline_without_augmentation(self):
        clf = train_classifier(_split(_blob_samples(10)), None, FAST_CFG)
        _, report = evaluate(clf, _split(_blob_samples(6, seed=9, path_prefix="t")))
        assert report.average > 90.0

    def test_augmentation_extends_training_set_by_cardinality(self):
        base = _split(_blob_samples(6))
        aug = _split(_blob_samples(4, seed=2, path_prefix="aug"))
        clf = train_classifier(base, [aug], FAST_CFG)
        assert len(clf.train_paths) == 18 + 12

    def test_augmentation_label_mismatch_fatal(self):
        base = _split(_blob_samples(4))
        bad = LabeledSplit(["unknown_disease"], train=_blob_samples(2, classes=1))
        with pytest.raises(ConfigError, match="vocabulary"):
            train_classifier(base, [bad], FAST_CFG)

    def test_augmentation_labels_remap_by_name(self):
        base = _split(_blob_samples(6))
        # augmentation set whose folder order differs: only class_2 present
        aug = LabeledSplit(["class_2"], train=[
            LabeledSample(s.pixels, 0, Path(f"/aug2/{i}.png"))
            for i, s in enumerate(_blob_samples(4, seed=3)) if s.label == 2
        ])
        clf = train_classifier(base, [aug], FAST_CFG)
        _, report = evaluate(clf, _split(_blob_samples(5, seed=11, path_prefix="t2")))
        assert report.rows[2].accuracy == 100.0

    def test_single_sample_memorization(self):
        cfg = ClassifierConfig(backbone="linear", input_side=12, epochs=60, batch_size=4,
                               flip_augment=True, seed=1)
        base = _split(_blob_samples(1))
        clf = train_classifier(base, None, cfg)
        from leafgan.training import accuracy

        assert accuracy(clf.model, base.train) == 1.0

    def test_needs_two_classes(self):
        single = LabeledSplit(["only"], train=_blob_samples(3, classes=1))
        with pytest.raises(ConfigError, match="two classes"):
            train_classifier(single, None, FAST_CFG)

    def test_deterministic_reports(self):
        test_set = _split(_blob_samples(5, seed=7, path_prefix="t3"))
        reports = []
        for _ in range(2):
            clf = train_classifier(_split(_blob_samples(8)), None, FAST_CFG)
            _, report = evaluate(clf, test_set)
            reports.append(report)
        assert reports[0] == reports[1]


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        clf = train_classifier(_split(_blob_samples(4)), None, FAST_CFG)
        path = save_trained_classifier(clf, tmp_path, "linear", 12)
        loaded = load_trained_classifier(path)
        assert loaded.class_names == clf.class_names
        assert loaded.train_paths == clf.train_paths
        for p1, p2 in zip(clf.model.parameters(), loaded.model.parameters()):
            assert torch.equal(p1, p2)

    def test_report_csv_layout(self, tmp_path):
        report = _report([85.1, 75.4, 62.8, 61.8], counts=[1046, 2034, 1220, 89])
        path = write_report_csv(report, tmp_path / "r.csv")
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "class,test_count,accuracy_pct"
        assert lines[1].startswith("healthy,1046,85.1")
        assert lines[-1].startswith("average,,71.2")
