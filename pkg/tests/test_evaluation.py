import numpy as np
import pytest

from trbf.core import NetConfig
from trbf.errors import ParseError, UnsupportedVersionError
from trbf.evaluation import (
    REFERENCE_TEST_CONFUSION,
    REFERENCE_TRAIN_CONFUSION,
    ConfusionMatrix,
    accuracy,
    confusion_matrix,
    delay_sweep,
    format_report,
    noise_sweep,
    read_report,
    write_report,
)
from trbf.ols import TrainConfig

VOWELS = ["ah", "aw", "ax", "ax-h", "uh", "uw"]


class TestConfusion:
    def test_perfect_classifier(self, small_model, small_corpus):
        Xtr, ytr, _, _ = small_corpus
        keep = small_model.predict(Xtr) == ytr
        cm = confusion_matrix(small_model, Xtr[keep], ytr[keep])
        assert (cm.counts == np.diag(np.diag(cm.counts))).all()
        for c in small_model.classes:
            assert cm.counts.sum(1)[small_model.classes.index(c)] == (ytr[keep] == c).sum()
        assert accuracy(cm) == 1.0

    def test_row_sums_are_class_counts(self, small_model, small_corpus):
        _, _, Xte, yte = small_corpus
        cm = confusion_matrix(small_model, Xte, yte)
        for i, c in enumerate(cm.classes):
            assert cm.counts[i].sum() == (yte == c).sum()
        np.testing.assert_array_equal(cm.counts.sum(0), [(small_model.predict(Xte) == c).sum() for c in cm.classes])

    def test_layout(self):
        cm = ConfusionMatrix(VOWELS, REFERENCE_TEST_CONFUSION)
        assert cm.count("uw", "uh") == 18
        assert cm.count("uh", "uw") == 4

    def test_empty(self, small_model):
        cm = confusion_matrix(small_model, np.zeros((0, 5, 13)), [])
        assert cm.total == 0 and cm.counts.shape == (6, 6)
        with pytest.raises(ValueError):
            accuracy(cm)

    def test_unknown_label(self, small_model, small_corpus):
        _, _, Xte, _ = small_corpus
        with pytest.raises(ValueError, match="ee"):
            confusion_matrix(small_model, Xte[:2], ["ah", "ee"])


class TestAccuracy:
    def test_diagonal(self):
        assert accuracy(ConfusionMatrix(["a", "b"], [[3, 0], [0, 4]])) == 1.0

    def test_reference_training_matrix(self):
        acc = accuracy(ConfusionMatrix(VOWELS, REFERENCE_TRAIN_CONFUSION))
        assert acc == 1471 / 1500
        assert round(acc * 100, 2) == 98.07

    def test_reference_test_matrix(self):
        acc = accuracy(ConfusionMatrix(VOWELS, REFERENCE_TEST_CONFUSION))
        assert acc == 676 / 750
        assert round(acc, 4) == 0.9013

    def test_reference_row_sums(self):
        assert np.sum(REFERENCE_TRAIN_CONFUSION, axis=1).tolist() == [250] * 6
        assert np.sum(REFERENCE_TEST_CONFUSION, axis=1).tolist() == [125] * 6

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionMatrix(["a", "b"], [[1, -1], [0, 1]])


class TestNoiseSweep:
    def test_zero_noise_is_clean(self, small_model, small_corpus):
        _, _, Xte, yte = small_corpus
        res = noise_sweep(small_model, Xte, yte, [0.0, 0.05], seed=3)
        assert res.accuracies[0] == accuracy(confusion_matrix(small_model, Xte, yte))
        np.testing.assert_array_equal(res.matrices[0].counts, confusion_matrix(small_model, Xte, yte).counts)

    def test_repeatable(self, small_model, small_corpus):
        _, _, Xte, yte = small_corpus
        sig = [0.01, 0.5, 2.0]
        a = noise_sweep(small_model, Xte, yte, sig, seed=9)
        b = noise_sweep(small_model, Xte, yte, sig, seed=9)
        assert a.accuracies == b.accuracies
        assert a.format() == b.format()

    def test_heavy_noise_hurts(self, small_model, small_corpus):
        _, _, Xte, yte = small_corpus
        res = noise_sweep(small_model, Xte, yte, [0.0, 5.0], seed=0)
        assert res.accuracies[1] < res.accuracies[0]
        assert all(0.0 <= a <= 1.0 for a in res.accuracies)

    def test_negative_sigma(self, small_model, small_corpus):
        _, _, Xte, yte = small_corpus
        with pytest.raises(ValueError):
            noise_sweep(small_model, Xte, yte, [-0.1])

    def test_table(self, small_model, small_corpus):
        _, _, Xte, yte = small_corpus
        lines = noise_sweep(small_model, Xte, yte, [0.0, 0.035]).format().splitlines()
        assert lines[0] == "run\tsigma\taccuracy"
        assert lines[2].startswith("sigma=0.035\t0.035\t")


class TestDelaySweep:
    def test_structure(self, small_corpus):
        Xtr, ytr, Xte, yte = small_corpus
        res = delay_sweep(Xtr, ytr, Xte, yte, NetConfig(), [5, 4, 3, 2], TrainConfig(max_blocks=10))
        assert res.labels == ["5(5)", "5(4)", "5(3)", "5(2)"]
        assert len(res.accuracies) == 4
        assert all(0.0 <= a <= 1.0 for a in res.accuracies + res.extra["train_accuracy"])
        assert res.format().splitlines()[0] == "run\tnde\taccuracy\ttrain_accuracy"

    def test_repeated_delay_repeats_accuracy(self, small_corpus):
        Xtr, ytr, Xte, yte = small_corpus
        res = delay_sweep(Xtr, ytr, Xte, yte, NetConfig(), [3, 3], TrainConfig(max_blocks=5))
        assert res.accuracies[0] == res.accuracies[1]

    def test_out_of_range(self, small_corpus):
        Xtr, ytr, Xte, yte = small_corpus
        with pytest.raises(ValueError):
            delay_sweep(Xtr, ytr, Xte, yte, NetConfig(), [6])


class TestReport:
    def test_round_trip(self, tmp_path):
        cm = ConfusionMatrix(VOWELS, REFERENCE_TEST_CONFUSION)
        write_report(tmp_path / "r", cm, {"seconds": 1.5})
        cm2, metrics = read_report(tmp_path / "r")
        np.testing.assert_array_equal(cm2.counts, cm.counts)
        assert metrics == {"accuracy": 676 / 750, "seconds": 1.5}

    def test_format(self):
        text = format_report(ConfusionMatrix(["a", "b"], [[2, 1], [0, 3]]))
        assert text.splitlines() == ["TRBF-REPORT v1", "confusion a b", "a 2 1", "b 0 3", "accuracy=0.8333333333333334"]

    def test_bad_files(self, tmp_path):
        (tmp_path / "r").write_text("TRBF-REPORT v2\n")
        with pytest.raises(UnsupportedVersionError):
            read_report(tmp_path / "r")
        (tmp_path / "r").write_text("TRBF-REPORT v1\nconfusion a b\na 1 0\n")
        with pytest.raises(ParseError) as err:
            read_report(tmp_path / "r")
        assert err.value.line == 4
