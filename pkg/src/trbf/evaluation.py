"""Accuracy, confusion matrices, delay sweeps and noise-robustness sweeps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import NetConfig, TrbfEnsemble, check_tokens, standardize
from .errors import ParseError, UnsupportedVersionError
from .ols import TrainConfig, train_ensemble

log = logging.getLogger(__name__)

REPORT_MAGIC = "TRBF-REPORT"

# Reference confusion matrices for a six-vowel TIMIT subset
# (rows: true /ah/ /aw/ /ax/ /ax-h/ /uh/ /uw/, columns: predicted).
REFERENCE_TRAIN_CONFUSION = [
    [247, 1, 2, 0, 0, 0],
    [3, 247, 0, 0, 0, 0],
    [2, 0, 239, 4, 5, 0],
    [0, 0, 0, 249, 1, 0],
    [0, 0, 3, 0, 245, 2],
    [0, 2, 1, 0, 3, 244],
]
REFERENCE_TEST_CONFUSION = [
    [116, 1, 0, 0, 8, 0],
    [15, 107, 1, 0, 2, 0],
    [2, 2, 112, 0, 9, 0],
    [0, 3, 0, 121, 1, 0],
    [6, 0, 0, 0, 115, 4],
    [0, 2, 0, 0, 18, 105],
]


@dataclass
class ConfusionMatrix:
    classes: List[str]
    counts: np.ndarray  # rows: true class, columns: predicted class

    def __post_init__(self):
        self.classes = [str(c) for c in self.classes]
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("confusion counts must be non-negative")

    def count(self, true, predicted) -> int:
        return int(self.counts[self.classes.index(true), self.classes.index(predicted)])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def format(self) -> str:
        width = max(6, *(len(c) + 1 for c in self.classes))
        head = " " * width + "".join(f"{c:>{width}}" for c in self.classes)
        rows = [f"{c:<{width}}" + "".join(f"{v:>{width}d}" for v in row) for c, row in zip(self.classes, self.counts)]
        return "\n".join([head] + rows)


def confusion_from_predictions(classes, y_true, y_pred) -> ConfusionMatrix:
    classes = [str(c) for c in classes]
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(np.asarray(y_true).astype(str), np.asarray(y_pred).astype(str)):
        if t not in index:
            raise ValueError(f"label {t!r} is not a model class ({', '.join(classes)})")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(classes, counts)


def confusion_matrix(ens: TrbfEnsemble, tokens, labels, standardized: bool = False) -> ConfusionMatrix:
    labels = np.asarray(labels).astype(str)
    unknown = sorted(set(labels) - set(ens.classes))
    if unknown:
        raise ValueError(f"labels {unknown} are not model classes ({', '.join(ens.classes)})")
    if len(labels) == 0:
        return ConfusionMatrix(ens.classes, np.zeros((len(ens.classes),) * 2, dtype=np.int64))
    pred = ens.predict(tokens, standardized)
    return confusion_from_predictions(ens.classes, labels, pred)


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total <= 0:
        raise ValueError("accuracy of an empty confusion matrix is undefined")
    return float(np.trace(cm.counts)) / total


@dataclass
class SweepResult:
    parameter: str
    values: List
    accuracies: List[float]
    labels: List[str] = field(default_factory=list)
    matrices: List[ConfusionMatrix] = field(default_factory=list)
    extra: Dict[str, List[float]] = field(default_factory=dict)

    def format(self) -> str:
        cols = ["run", self.parameter, "accuracy"] + list(self.extra)
        lines = ["\t".join(cols)]
        for i, (v, acc) in enumerate(zip(self.values, self.accuracies)):
            row = [self.labels[i] if self.labels else str(v), str(v), repr(acc)]
            row += [repr(self.extra[k][i]) for k in self.extra]
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"


def noise_sweep(ens: TrbfEnsemble, tokens, labels, sigmas: Sequence[float], seed: int = 0) -> SweepResult:
    """Accuracy under additive Gaussian noise on the standardized features.

    Each noise level draws from its own generator seeded by ``(seed, index)``
    so curves repeat exactly.
    """
    X = standardize(ens.stats, check_tokens(tokens, ens.cfg))
    accs, mats = [], []
    for i, s in enumerate(sigmas):
        if s < 0:
            raise ValueError(f"noise level must be >= 0, got {s}")
        noisy = X if s == 0 else X + s * np.random.default_rng([seed, i]).standard_normal(X.shape)
        cm = confusion_matrix(ens, noisy, labels, standardized=True)
        mats.append(cm)
        accs.append(accuracy(cm))
        log.info("noise sigma=%g accuracy=%.4f", s, accs[-1])
    return SweepResult("sigma", list(sigmas), accs, [f"sigma={s:g}" for s in sigmas], mats)


def delay_sweep(
    train,
    train_labels,
    test,
    test_labels,
    base: NetConfig,
    delays: Sequence[int],
    traincfg: TrainConfig = TrainConfig(),
    prototypes=None,
    prototype_labels=None,
    n_jobs: Optional[int] = None,
) -> SweepResult:
    """Retrain and evaluate for each time delay; runs are labelled ``Nfe(Nde)``.

    Without explicit prototypes every training token is a candidate centre.
    """
    for nde in delays:
        if not (1 <= nde <= base.nfe):
            raise ValueError(f"delay {nde} outside 1..{base.nfe}")
    if prototypes is None:
        prototypes, prototype_labels = train, train_labels
    accs, mats, train_accs = [], [], []
    for nde in delays:
        cfg = replace(base, nde=int(nde))
        ens, _ = train_ensemble(prototypes, prototype_labels, train, train_labels, cfg, traincfg, n_jobs=n_jobs)
        cm = confusion_matrix(ens, test, test_labels)
        mats.append(cm)
        accs.append(accuracy(cm))
        train_accs.append(accuracy(confusion_matrix(ens, train, train_labels)))
        log.info("delay %d(%d): train=%.4f test=%.4f", base.nfe, nde, train_accs[-1], accs[-1])
    return SweepResult(
        "nde", list(delays), accs, [f"{base.nfe}({d})" for d in delays], mats, {"train_accuracy": train_accs}
    )


def format_report(cm: ConfusionMatrix, extra: Optional[Dict[str, float]] = None) -> str:
    lines = [f"{REPORT_MAGIC} v1", "confusion " + " ".join(cm.classes)]
    for cls, row in zip(cm.classes, cm.counts):
        lines.append(cls + " " + " ".join(str(int(v)) for v in row))
    lines.append(f"accuracy={accuracy(cm)!r}" if cm.total else "accuracy=nan")
    for key, value in (extra or {}).items():
        lines.append(f"{key}={value!r}")
    return "\n".join(lines) + "\n"


def write_report(path, cm: ConfusionMatrix, extra=None) -> None:
    Path(path).write_text(format_report(cm, extra), encoding="utf-8")


def read_report(path):
    """Parse a report file into ``(ConfusionMatrix, metrics)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(REPORT_MAGIC):
        raise ParseError(f"missing {REPORT_MAGIC} header", path, 1)
    if lines[0].split()[1:2] != ["v1"]:
        raise UnsupportedVersionError(f"unsupported report version in {lines[0]!r}", path, 1)
    if len(lines) < 2 or not lines[1].startswith("confusion "):
        raise ParseError("expected 'confusion' line", path, 2)
    classes = lines[1].split()[1:]
    rows = []
    for i, cls in enumerate(classes):
        lineno = 3 + i
        if lineno > len(lines):
            raise ParseError("file truncated inside confusion block", path, lineno)
        parts = lines[lineno - 1].split()
        if len(parts) != len(classes) + 1 or parts[0] != cls:
            raise ParseError(f"malformed confusion row for {cls}", path, lineno)
        rows.append([int(v) for v in parts[1:]])
    metrics = {}
    for lineno, line in enumerate(lines[3 + len(classes) - 1 :], 3 + len(classes)):
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"expected key=value, found {line!r}", path, lineno)
        metrics[key] = float(value)
    return ConfusionMatrix(classes, rows), metrics
