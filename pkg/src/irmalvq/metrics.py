import numpy as np

from .errors import EmptyTestClass, ShapeMismatch


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """C x C counts; rows are true labels 1..C, columns predicted labels."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ShapeMismatch("label vectors differ in length")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true - 1, y_pred - 1), 1)
    return cm


def balanced_accuracy(cm) -> float:
    """Mean per-class recall."""
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ShapeMismatch(f"confusion matrix must be square, got {cm.shape}")
    support = cm.sum(axis=1)
    if np.any(support <= 0):
        raise EmptyTestClass(f"class {int(np.flatnonzero(support <= 0)[0]) + 1} has no test samples")
    return float(np.mean(np.diag(cm) / support))
