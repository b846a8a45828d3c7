import numpy as np
import pytest

from noisylab.errors import EmptySubsetError
from noisylab.metrics import (
    classwise_accuracy,
    clean_subset_confidence,
    confusion_matrix,
    prediction_distribution,
)


def test_classwise_all_correct():
    report = classwise_accuracy([0, 1, 2, 0], [0, 1, 2, 0], 3)
    assert np.array_equal(report.per_class, np.ones(3))
    assert report.overall == 1.0
    assert report.spread == 0.0
    assert report.empty_classes == ()


def test_classwise_constant_predictor():
    report = classwise_accuracy([0, 0, 0, 0], [0, 0, 1, 1], 2)
    assert np.array_equal(report.per_class, [1.0, 0.0])
    assert report.overall == 0.5
    assert report.spread == 1.0


def test_classwise_hand_count():
    report = classwise_accuracy([0, 1, 1, 2], [0, 0, 1, 2], 3)
    assert np.allclose(report.per_class, [0.5, 1.0, 1.0])
    assert report.overall == 0.75


def test_classwise_zero_support_convention():
    report = classwise_accuracy([0, 0], [0, 0], 3)
    assert report.per_class[1] == 1.0 and report.per_class[2] == 1.0
    assert report.empty_classes == (1, 2)


def test_classwise_overall_is_support_weighted_mean():
    gen = np.random.default_rng(0)
    for _ in range(50):
        k = int(gen.integers(2, 8))
        n = int(gen.integers(5, 60))
        labels = gen.integers(0, k, size=n)
        preds = gen.integers(0, k, size=n)
        report = classwise_accuracy(preds, labels, k)
        support = np.bincount(labels, minlength=k)
        weighted = np.dot(report.per_class, support) / n
        assert report.overall == pytest.approx(weighted, abs=1e-12)


def test_classwise_length_mismatch():
    with pytest.raises(ValueError):
        classwise_accuracy([0, 1], [0], 2)


def test_prediction_distribution_perfect():
    labels = np.repeat(np.arange(5), 100)
    dist = prediction_distribution(labels, labels, 5)
    assert np.array_equal(dist.predicted, np.full(5, 100))
    assert np.array_equal(dist.correct, np.full(5, 100))


def test_prediction_distribution_collapsed():
    dist = prediction_distribution([1, 1], [0, 1], 2)
    assert np.array_equal(dist.predicted, [0, 2])
    assert np.array_equal(dist.correct, [0, 1])


def test_prediction_distribution_invariants():
    gen = np.random.default_rng(1)
    labels = gen.integers(0, 6, size=200)
    preds = gen.integers(0, 6, size=200)
    dist = prediction_distribution(preds, labels, 6)
    assert dist.predicted.sum() == 200
    assert np.all(dist.correct <= dist.predicted)
    assert dist.correct.sum() == int((labels == preds).sum())


def test_confusion_matrix_counts():
    cm = confusion_matrix([0, 1, 1, 2], [0, 0, 1, 2], 3)
    assert np.array_equal(cm, [[1, 1, 0], [0, 1, 0], [0, 0, 1]])
    assert cm.sum() == 4


def test_clean_subset_confidence_single_sample():
    probs = np.array([[0.0, 1.0, 0.0]])
    out = clean_subset_confidence(probs, [1], [True], 1)
    assert np.array_equal(out, [0.0, 1.0, 0.0])


def test_clean_subset_confidence_mean():
    probs = np.array([[0.6, 0.4], [0.4, 0.6]])
    out = clean_subset_confidence(probs, [0, 0], [True, True], 0)
    assert np.allclose(out, [0.5, 0.5], atol=1e-15)


def test_clean_subset_confidence_filters_mask_and_class():
    probs = np.array([[0.9, 0.1], [0.2, 0.8], [0.7, 0.3]])
    # sample 1 is the wrong class, sample 2 is masked out
    out = clean_subset_confidence(probs, [0, 1, 0], [True, True, False], 0)
    assert np.array_equal(out, [0.9, 0.1])


def test_clean_subset_confidence_empty_rejected():
    with pytest.raises(EmptySubsetError):
        clean_subset_confidence(np.eye(2), [0, 1], [False, False], 0)


def test_clean_subset_confidence_sums_to_one():
    gen = np.random.default_rng(2)
    probs = gen.dirichlet(np.ones(4), size=100)
    labels = gen.integers(0, 4, size=100)
    mask = gen.random(100) < 0.7
    for c in range(4):
        if (mask & (labels == c)).any():
            out = clean_subset_confidence(probs, labels, mask, c)
            assert out.sum() == pytest.approx(1.0, abs=1e-9)
