"""Max-softmax OOD scoring and evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ScoreSet:
    id_scores: np.ndarray
    ood_scores: np.ndarray

    def __post_init__(self):
        self.id_scores = np.asarray(self.id_scores, dtype=np.float64).ravel()
        self.ood_scores = np.asarray(self.ood_scores, dtype=np.float64).ravel()
        if self.id_scores.size == 0 or self.ood_scores.size == 0:
            raise ValueError("both ID and OOD scores must be non-empty")
        if not (np.isfinite(self.id_scores).all() and np.isfinite(self.ood_scores).all()):
            raise ValueError("scores must be finite")


@dataclass
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray

    @property
    def points(self):
        return list(zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist()))

    def area(self):
        return float(np.sum(np.diff(self.fpr) * (self.tpr[1:] + self.tpr[:-1]) / 2.0))


def ood_score(prob_row):
    """Maximum softmax probability; higher means more ID-like."""
    return float(np.max(prob_row))


def max_softmax(probs):
    return np.asarray(probs, dtype=np.float64).max(axis=1)


def _average_ranks(values):
    # 1-based ranks, tied values share the mean of their positions.
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], len(values)]
    mean_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(len(values))
    ranks[order] = np.repeat(mean_rank, ends - starts)
    return ranks


def auroc(scores):
    """Mann-Whitney estimate of P(ID score > OOD score), ties counted as one half."""
    m, n = scores.id_scores.size, scores.ood_scores.size
    ranks = _average_ranks(np.concatenate([scores.id_scores, scores.ood_scores]))
    u = ranks[:m].sum() - m * (m + 1) / 2.0
    return float(u / (m * n))


def roc_points(scores):
    """ROC curve over every distinct score, with +inf and -inf sentinels.

    A sample is predicted ID when its score is >= the threshold.
    """
    thresholds = np.unique(np.concatenate([scores.id_scores, scores.ood_scores]))[::-1]
    thresholds = np.r_[np.inf, thresholds, -np.inf]
    id_sorted = np.sort(scores.id_scores)
    ood_sorted = np.sort(scores.ood_scores)
    # count of scores >= t
    tp = id_sorted.size - np.searchsorted(id_sorted, thresholds, side="left")
    fp = ood_sorted.size - np.searchsorted(ood_sorted, thresholds, side="left")
    return RocCurve(thresholds, fp / ood_sorted.size, tp / id_sorted.size)


def accuracy(probs, labels):
    """Fraction of rows whose argmax equals the label; ties go to the lowest class."""
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if len(probs) == 0:
        raise ValueError("empty input")
    if len(probs) != len(labels):
        raise ValueError(f"{len(probs)} rows but {len(labels)} labels")
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def throughput(sample_count, elapsed_seconds):
    if elapsed_seconds <= 0:
        raise ValueError("elapsed time must be positive")
    return sample_count / elapsed_seconds


def roc_csv(curve):
    """Render a curve as ``threshold,fpr,tpr`` text with 9 significant digits."""
    lines = ["threshold,fpr,tpr"]
    for t, f, p in zip(curve.thresholds, curve.fpr, curve.tpr):
        lines.append(f"{t:.9g},{f:.9g},{p:.9g}")
    return "\n".join(lines) + "\n"
