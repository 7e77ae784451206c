"""Metrics, the logistic-regression baseline, and the comparison table.

AUROC follows the Mann-Whitney convention: the probability that a random
positive outscores a random negative, with ties counting one half.  It is
computed from average ranks after one sort, O(n log n).  F1 is reported
for the positive class on binary tasks and macro-averaged on multiclass
tasks.  Balanced accuracy is the unweighted mean of per-class recall.

The baseline is full-batch gradient descent on mean cross-entropy: a
single weight vector with a sigmoid for binary tasks, per-class weight
rows with a softmax otherwise.  ``benchmark`` evaluates any number of
scorers on one test set and emits rows that can also be rendered as an
aligned text table or a delimited file; externally produced score files
("label,score" per line) can be slotted in as extra rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from . import _backend
from .errors import (ConfigError, DataFormatError, DimensionError,
                     UndefinedMetricError)
from .linalg import Matrix, Vector, new_buffer
from .model import LabeledDataset, TrainConfig, _log_softmax
from .text import TfidfModel, transform

# scorer: text -> (predicted class index, per-class probabilities)
Scorer = Callable[[str], tuple[int, Optional[Sequence[float]]]]


def _check_lengths(labels, predictions) -> None:
    if len(labels) != len(predictions):
        raise DimensionError(
            f"got {len(labels)} labels but {len(predictions)} predictions"
        )
    if len(labels) == 0:
        raise ConfigError("metric input is empty")


def accuracy(labels: Sequence[int], predictions: Sequence[int]) -> float:
    """Fraction of exact matches."""
    _check_lengths(labels, predictions)
    hits = sum(1 for y, p in zip(labels, predictions) if y == p)
    return hits / len(labels)


def f1(labels: Sequence[int], predictions: Sequence[int],
       positive_class: int = 1) -> float:
    """Harmonic mean of precision and recall; 0 when there are no true positives."""
    _check_lengths(labels, predictions)
    tp = fp = fn = 0
    for y, p in zip(labels, predictions):
        if p == positive_class:
            if y == positive_class:
                tp += 1
            else:
                fp += 1
        elif y == positive_class:
            fn += 1
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def f1_macro(labels: Sequence[int], predictions: Sequence[int]) -> float:
    """Unweighted mean of one-vs-rest F1 over the classes present in ``labels``."""
    _check_lengths(labels, predictions)
    classes = sorted(set(labels))
    return sum(f1(labels, predictions, c) for c in classes) / len(classes)


def auroc(labels: Sequence[int], scores: Sequence[float],
          positive_class: int = 1) -> float:
    """Probability a random positive outscores a random negative (ties count 1/2)."""
    _check_lengths(labels, scores)
    n_pos = sum(1 for y in labels if y == positive_class)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            "AUROC needs at least one positive and one negative label"
        )
    order = sorted(range(len(labels)), key=lambda i: scores[i])
    rank_sum_pos = 0.0
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg_rank = (i + j) / 2.0 + 1.0  # ranks are 1-based
        for k in range(i, j + 1):
            if labels[order[k]] == positive_class:
                rank_sum_pos += avg_rank
        i = j + 1
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def balanced_accuracy(labels: Sequence[int], predictions: Sequence[int]) -> float:
    """Unweighted mean of per-class recall over the classes present in ``labels``."""
    _check_lengths(labels, predictions)
    classes = sorted(set(labels))
    total = 0.0
    for c in classes:
        support = sum(1 for y in labels if y == c)
        hits = sum(1 for y, p in zip(labels, predictions) if y == c and p == c)
        total += hits / support
    return total / len(classes)


# ---------------------------------------------------------------------------
# logistic-regression baseline


@dataclass
class LogisticModel:
    """Linear classifier on feature vectors.

    Binary models hold one weight vector and a scalar bias scored with a
    sigmoid; multiclass models hold per-class weight rows and a bias
    vector scored with a softmax.
    """

    weights: object  # Vector (binary) or Matrix (multiclass)
    bias: object     # float (binary) or Vector (multiclass)
    n_classes: int

    @property
    def binary(self) -> bool:
        return self.n_classes == 2

    def probabilities(self, x: Vector) -> list[float]:
        if self.binary:
            z = _backend.kernels.dot(self.weights.data, x.data) + self.bias
            p = _sigmoid(z)
            return [1.0 - p, p]
        logits = Vector.zeros(self.n_classes)
        _backend.kernels.matvec_into(
            logits.data, self.weights.data, self.n_classes, self.weights.cols,
            x.data,
        )
        _backend.kernels.acc_scaled(logits.data, 1.0, self.bias.data)
        probs, _ = _log_softmax(logits)
        return probs.tolist()

    def predict(self, x: Vector) -> int:
        probs = self.probabilities(x)
        best = 0
        for i in range(1, self.n_classes):
            if probs[i] > probs[best]:
                best = i
        return best


def _sigmoid(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def binary_logistic_gradient(weights: Vector, bias: float,
                             batch: Sequence[tuple[Vector, int]],
                             l2_penalty: float = 0.0) -> tuple[Vector, float]:
    """Mean gradient of binary cross-entropy: ((sigmoid(w.x+b) - y) x, ...)."""
    if len(batch) == 0:
        raise ConfigError("gradient needs a non-empty batch")
    gw = Vector.zeros(weights.dim)
    gb = 0.0
    K = _backend.kernels
    for x, y in batch:
        err = _sigmoid(K.dot(weights.data, x.data) + bias) - float(y)
        K.acc_scaled(gw.data, err, x.data)
        gb += err
    inv = 1.0 / len(batch)
    K.scale_into(gw.data, inv, gw.data)
    if l2_penalty != 0.0:
        K.acc_scaled(gw.data, l2_penalty, weights.data)
    return gw, gb * inv


def train_logistic(data: LabeledDataset, tfidf: TfidfModel,
                   cfg: TrainConfig) -> LogisticModel:
    """Fit the baseline with ``cfg.epochs`` full-batch gradient steps.

    Weights start at zero, so before any step every input scores 0.5 (or
    uniform for multiclass) and the fit is deterministic without a seed.
    """
    if len(data) == 0:
        raise ConfigError("training data is empty")
    classes = sorted({label for _, label in data.examples})
    if len(classes) < 2:
        raise ConfigError("training data contains a single class")
    n_classes = max(classes) + 1
    feats = [transform(tfidf, text) for text, _ in data.examples]
    labels = [label for _, label in data.examples]
    nv = tfidf.n_features
    K = _backend.kernels

    if n_classes == 2:
        w = Vector.zeros(nv)
        b = 0.0
        batch = list(zip(feats, labels))
        for _ in range(cfg.epochs):
            gw, gb = binary_logistic_gradient(w, b, batch, cfg.l2_penalty)
            K.acc_scaled(w.data, -cfg.learning_rate, gw.data)
            b -= cfg.learning_rate * gb
        return LogisticModel(weights=w, bias=b, n_classes=2)

    w = Matrix.zeros(n_classes, nv)
    b = Vector.zeros(n_classes)
    gww = new_buffer(n_classes * nv)
    gbb = new_buffer(n_classes)
    logits = Vector.zeros(n_classes)
    derr = new_buffer(n_classes)
    inv = 1.0 / len(feats)
    for _ in range(cfg.epochs):
        K.fill(gww, 0.0)
        K.fill(gbb, 0.0)
        for x, y in zip(feats, labels):
            K.matvec_into(logits.data, w.data, n_classes, nv, x.data)
            K.acc_scaled(logits.data, 1.0, b.data)
            probs, _ = _log_softmax(logits)
            K.copy_into(derr, probs.data)
            derr[y] -= 1.0
            K.outer_acc(gww, n_classes, nv, 1.0, derr, x.data)
            K.acc_scaled(gbb, 1.0, derr)
        K.scale_into(gww, inv, gww)
        K.scale_into(gbb, inv, gbb)
        if cfg.l2_penalty != 0.0:
            K.acc_scaled(gww, cfg.l2_penalty, w.data)
        K.acc_scaled(w.data, -cfg.learning_rate, gww)
        K.acc_scaled(b.data, -cfg.learning_rate, gbb)
    return LogisticModel(weights=w, bias=b, n_classes=n_classes)


def logistic_scorer(lm: LogisticModel, tfidf: TfidfModel) -> Scorer:
    def score(text: str) -> tuple[int, list[float]]:
        x = transform(tfidf, text)
        probs = lm.probabilities(x)
        best = 0
        for i in range(1, lm.n_classes):
            if probs[i] > probs[best]:
                best = i
        return best, probs

    return score


# ---------------------------------------------------------------------------
# benchmark table


@dataclass
class EvalResult:
    """One comparison-table row."""

    model: str
    interpretable: bool
    accuracy: float
    f1: float
    auroc: Optional[float]
    balanced_accuracy: float


def benchmark(models: Sequence[tuple[str, bool, Scorer]], test: LabeledDataset,
              tfidf: TfidfModel, ovr_auroc: bool = False) -> list[EvalResult]:
    """Evaluate every (name, interpretable, scorer) triple on ``test``.

    Binary AUROC uses the positive-class probability; for more classes it
    is omitted unless ``ovr_auroc`` asks for the macro one-vs-rest value.
    """
    if len(test) == 0:
        raise ConfigError("test set is empty")
    labels = [label for _, label in test.examples]
    n_classes = max(labels) + 1
    results = []
    for name, interpretable, scorer in models:
        try:
            preds: list[int] = []
            probs: list[Optional[Sequence[float]]] = []
            for text, _ in test.examples:
                p, pr = scorer(text)
                preds.append(p)
                probs.append(pr)
            have_probs = all(pr is not None for pr in probs)
            if n_classes == 2:
                f1_value = f1(labels, preds, positive_class=1)
                area = (auroc(labels, [pr[1] for pr in probs])
                        if have_probs else None)
            else:
                f1_value = f1_macro(labels, preds)
                area = None
                if ovr_auroc and have_probs:
                    parts = []
                    for c in sorted(set(labels)):
                        parts.append(auroc(
                            [1 if y == c else 0 for y in labels],
                            [pr[c] for pr in probs],
                        ))
                    area = sum(parts) / len(parts)
            results.append(EvalResult(
                model=name,
                interpretable=interpretable,
                accuracy=accuracy(labels, preds),
                f1=f1_value,
                auroc=area,
                balanced_accuracy=balanced_accuracy(labels, preds),
            ))
        except Exception as e:
            try:
                wrapped = type(e)(f"model {name!r}: {e}")
            except TypeError:
                wrapped = RuntimeError(f"model {name!r}: {e}")
            raise wrapped from e
    return results


def result_from_scores(name: str, interpretable: bool, labels: Sequence[int],
                       scores: Sequence[float], threshold: float = 0.5) -> EvalResult:
    """Build a table row from externally produced binary scores."""
    _check_lengths(labels, scores)
    preds = [1 if s >= threshold else 0 for s in scores]
    return EvalResult(
        model=name,
        interpretable=interpretable,
        accuracy=accuracy(labels, preds),
        f1=f1(labels, preds),
        auroc=auroc(labels, scores),
        balanced_accuracy=balanced_accuracy(labels, preds),
    )


def parse_score_file(path: str) -> tuple[list[int], list[float]]:
    """Read "label,score" lines.  Raises DataFormatError with the line number."""
    labels: list[int] = []
    scores: list[float] = []
    with open(path, "r", encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataFormatError(
                    f"{path}:{lineno}: expected 'label,score', got {line!r}",
                    line=lineno,
                )
            try:
                labels.append(int(parts[0]))
                scores.append(float(parts[1]))
            except ValueError as e:
                raise DataFormatError(
                    f"{path}:{lineno}: {e}", line=lineno
                ) from e
    if not labels:
        raise DataFormatError(f"{path}: no score records found")
    return labels, scores


def format_benchmark_table(results: Sequence[EvalResult]) -> str:
    header = ("model", "interpretable", "accuracy", "f1", "auroc",
              "balanced_accuracy")
    rows = [header]
    for r in results:
        rows.append((
            r.model,
            "yes" if r.interpretable else "no",
            f"{r.accuracy:.4f}",
            f"{r.f1:.4f}",
            "-" if r.auroc is None else f"{r.auroc:.4f}",
            f"{r.balanced_accuracy:.4f}",
        ))
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i])
                               for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)


def write_benchmark_csv(results: Sequence[EvalResult], fp) -> None:
    fp.write("model,interpretable,accuracy,f1,auroc,balanced_accuracy\n")
    for r in results:
        area = "" if r.auroc is None else repr(r.auroc)
        fp.write(f"{r.model},{'yes' if r.interpretable else 'no'},"
                 f"{r.accuracy!r},{r.f1!r},{area},{r.balanced_accuracy!r}\n")
