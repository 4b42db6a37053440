import numpy as np
import pytest

from irregular_har.metrics import (
    ConfusionMatrix,
    confusion_matrix,
    macro_f1,
    per_class_f1,
    performance_loss,
)


def brute_macro_f1(pred, truth, k):
    """Precision/recall per class by direct counting."""
    scores = []
    for c in range(k):
        tp = sum(1 for p, t in zip(pred, truth) if p == c and t == c)
        fp = sum(1 for p, t in zip(pred, truth) if p == c and t != c)
        fn = sum(1 for p, t in zip(pred, truth) if p != c and t == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return sum(scores) / k


def test_perfect_predictions():
    labels = [0, 1, 2, 2, 1, 0, 3]
    cm = confusion_matrix(labels, labels, 4)
    assert np.array_equal(cm.counts, np.diag([2, 2, 2, 1]))
    assert macro_f1(cm) == 1.0


def test_empty_input_gives_zero_matrix():
    cm = confusion_matrix([], [], 3)
    assert cm.counts.shape == (3, 3) and cm.total == 0
    assert macro_f1(cm) == 0.0


def test_hand_tally():
    truth = [0, 0, 1, 1, 2, 2]
    pred = [0, 1, 1, 1, 0, 2]
    cm = confusion_matrix(pred, truth, 3)
    assert cm.counts.tolist() == [[1, 1, 0], [0, 2, 0], [1, 0, 1]]
    # class 0: P=1/2 R=1/2; class 1: P=2/3 R=1; class 2: P=1 R=1/2
    np.testing.assert_allclose(per_class_f1(cm), [0.5, 0.8, 2 / 3], rtol=0, atol=1e-15)


def test_all_predicted_one_class():
    cm = confusion_matrix([0] * 4, [0, 0, 1, 1], 2)
    assert macro_f1(cm) == pytest.approx(1 / 3, abs=1e-15)


def test_random_against_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(50):
        k = int(rng.integers(2, 9))
        n = int(rng.integers(1, 60))
        truth, pred = rng.integers(0, k, n), rng.integers(0, k, n)
        cm = confusion_matrix(pred, truth, k)
        assert abs(macro_f1(cm) - brute_macro_f1(pred, truth, k)) <= 1e-12


def test_sample_order_does_not_matter():
    rng = np.random.default_rng(1)
    truth, pred = rng.integers(0, 5, 40), rng.integers(0, 5, 40)
    order = rng.permutation(40)
    a = confusion_matrix(pred, truth, 5)
    b = confusion_matrix(pred[order], truth[order], 5)
    assert np.array_equal(a.counts, b.counts)


def test_bad_inputs():
    with pytest.raises(ValueError):
        confusion_matrix([0, 1], [0], 2)
    with pytest.raises(ValueError):
        confusion_matrix([0, 2], [0, 1], 2)
    with pytest.raises(ValueError):
        ConfusionMatrix(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        ConfusionMatrix(-np.ones((2, 2)))


def test_performance_loss():
    p_irr = 0.622 * (1 - 0.0133)
    assert round(p_irr, 4) == 0.6137
    assert performance_loss(0.622, p_irr) == pytest.approx(0.0133, abs=1e-12)
    assert performance_loss(0.8, 0.8) == 0.0
    assert performance_loss(0.8, 0.0) == 1.0
    assert performance_loss(0.5, 0.6) < 0
    with pytest.raises(ZeroDivisionError):
        performance_loss(0.0, 0.3)


def test_consistent_relabeling_invariance():
    rng = np.random.default_rng(2)
    for _ in range(20):
        k = int(rng.integers(2, 8))
        counts = rng.integers(0, 15, size=(k, k))
        perm = rng.permutation(k)
        relabeled = counts[np.ix_(perm, perm)]
        assert abs(macro_f1(ConfusionMatrix(counts)) - macro_f1(ConfusionMatrix(relabeled))) <= 1e-12
