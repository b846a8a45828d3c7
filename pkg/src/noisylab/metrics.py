"""Evaluation statistics: class-wise accuracy, prediction distribution, and
confidence profiles over the uncorrupted subset of a noisy training set."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySubsetError


@dataclass(frozen=True)
class ClasswiseReport:
    per_class: np.ndarray = field(repr=False)
    overall: float
    spread: float
    empty_classes: tuple[int, ...] = ()


@dataclass(frozen=True)
class PredictionDistribution:
    predicted: np.ndarray = field(repr=False)
    correct: np.ndarray = field(repr=False)


def _check_lengths(predictions, labels, num_classes):
    preds = np.asarray(predictions, dtype=np.int64)
    labs = np.asarray(labels, dtype=np.int64)
    if preds.shape != labs.shape or preds.ndim != 1:
        raise ValueError("predictions and labels must be 1-D and equal length")
    if labs.size and (labs.min() < 0 or labs.max() >= num_classes):
        raise ValueError("label out of range")
    return preds, labs


def classwise_accuracy(predictions, labels, num_classes: int) -> ClasswiseReport:
    """Per-class and overall accuracy plus the max - min spread.

    Classes with no test samples report accuracy 1.0 by convention and are
    listed in ``empty_classes`` so spreads stay defined on tiny sets.
    """
    preds, labs = _check_lengths(predictions, labels, num_classes)
    support = np.bincount(labs, minlength=num_classes).astype(np.float64)
    hits = np.bincount(labs[preds == labs], minlength=num_classes).astype(np.float64)
    empty = support == 0
    per_class = np.where(empty, 1.0, hits / np.where(empty, 1.0, support))
    overall = float((preds == labs).mean()) if labs.size else 1.0
    return ClasswiseReport(
        per_class=per_class,
        overall=overall,
        spread=float(per_class.max() - per_class.min()),
        empty_classes=tuple(int(c) for c in np.flatnonzero(empty)),
    )


def prediction_distribution(predictions, labels, num_classes: int) -> PredictionDistribution:
    """How many samples each class attracted, and how many of those were
    actually of that class (true positives)."""
    preds, labs = _check_lengths(predictions, labels, num_classes)
    predicted = np.bincount(preds, minlength=num_classes)
    correct = np.bincount(preds[preds == labs], minlength=num_classes)
    return PredictionDistribution(predicted=predicted, correct=correct)


def confusion_matrix(predictions, labels, num_classes: int) -> np.ndarray:
    """Counts indexed [true label, predicted label]."""
    preds, labs = _check_lengths(predictions, labels, num_classes)
    out = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(out, (labs, preds), 1)
    return out


def clean_subset_confidence(probabilities, labels, clean_mask, class_index: int) -> np.ndarray:
    """Mean predicted distribution over the uncorrupted samples of one class.

    Averages the full probability vectors of the samples whose label is
    ``class_index`` and whose clean_mask entry is true, exposing where the
    model's residual confidence sits.
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    labs = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(clean_mask, dtype=bool)
    if probs.ndim != 2 or len(labs) != len(probs) or len(mask) != len(probs):
        raise ValueError("probabilities, labels, and clean_mask lengths must agree")
    take = mask & (labs == class_index)
    if not take.any():
        raise EmptySubsetError(f"no clean samples of class {class_index}")
    return probs[take].mean(axis=0)
