"""Sigmoid, binary cross-entropy on logits, and label rounding.

The loss for a logit v and a {0,1} target w is

    -w*log(sigma(v)) - (1-w)*log(1 - sigma(v))

computed in the overflow-safe form  max(v,0) - v*w + log(1 + exp(-|v|)),
which is algebraically identical for every real v.
"""

import numpy as np

from ..errors import DomainError, ParameterError


def sigmoid(v):
    """Numerically stable logistic function, elementwise."""
    v = np.asarray(v, dtype=np.float64)
    e = np.exp(-np.abs(v))
    return np.where(v >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def round_label(v):
    """Round sigma(v) to the nearest integer label, half away from zero.

    sigma(v) >= 0.5 is equivalent to v >= 0, so the tie sigma(v) == 0.5
    deterministically maps to label 1.
    """
    return (np.asarray(v) >= 0.0).astype(np.int64)


def _check_labels(labels):
    labels = np.asarray(labels, dtype=np.float64)
    if not np.all((labels == 0.0) | (labels == 1.0)):
        bad = labels[(labels != 0.0) & (labels != 1.0)]
        raise DomainError(f"labels must be 0 or 1, got {bad[:4]!r}")
    return labels


def bce_with_logits(logits, labels, reduction: str = "sum") -> float:
    """Binary cross-entropy of per-sample logits against {0,1} labels.

    reduction="sum" returns the plain sum over samples; "mean" divides by
    the sample count (the per-batch reduction used during training).
    """
    v = np.asarray(logits, dtype=np.float64).ravel()
    w = _check_labels(labels).ravel()
    if v.shape != w.shape:
        raise ParameterError(f"logits {v.shape} and labels {w.shape} differ in length")
    per = np.maximum(v, 0.0) - v * w + np.log1p(np.exp(-np.abs(v)))
    if reduction == "sum":
        return float(per.sum())
    if reduction == "mean":
        return float(per.mean())
    raise ParameterError(f"unknown reduction {reduction!r}")


def bce_grad(logits, labels, reduction: str = "sum") -> np.ndarray:
    """d(loss)/d(logits) for bce_with_logits: sigma(v) - w, scaled by the reduction."""
    v = np.asarray(logits, dtype=np.float64)
    w = _check_labels(labels)
    g = sigmoid(v) - w
    if reduction == "mean":
        g = g / v.size
    elif reduction != "sum":
        raise ParameterError(f"unknown reduction {reduction!r}")
    return g
