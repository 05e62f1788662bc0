"""Ranking metrics for anomaly scores: AUROC, average precision, FPR at a TPR.

Label 1 (anomalous) is the positive class and higher scores mean "more
anomalous". Tied scores always form a single threshold group.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from laft.errors import InputError


@dataclass(frozen=True)
class EvalReport:
    auroc: float
    auprc: float
    fpr95: float
    positives: int
    negatives: int

    def to_json(self) -> dict:
        return {
            "auroc": self.auroc,
            "auprc": self.auprc,
            "fpr95": self.fpr95,
            "positives": self.positives,
            "negatives": self.negatives,
        }


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise InputError(f"{len(s)} scores but {len(y)} labels")
    if np.any(np.isnan(s)):
        raise InputError("scores contain NaN")
    if not np.all((y == 0) | (y == 1)):
        raise InputError("labels must be 0 or 1")
    y = y.astype(np.int64)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise InputError("both classes must be present")
    return s, y


def _threshold_groups(s: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative (tp, fp) at each distinct score, descending."""
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    # last index of every run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s_sorted) - 1]
    tp = np.cumsum(y_sorted)[ends]
    fp = (ends + 1) - tp
    return tp, fp


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC: P(score_pos > score_neg) + 0.5 P(tie)."""
    s, y = _check(scores, labels)
    tp, fp = _threshold_groups(s, y)
    n_pos, n_neg = int(tp[-1]), int(fp[-1])
    tp_prev = np.r_[0, tp[:-1]]
    fp_step = np.diff(np.r_[0, fp])
    # each negative in a group beats all earlier positives, ties count half
    wins = np.sum(fp_step * (2 * tp_prev + (tp - tp_prev)))
    return float(wins / 2) / (n_pos * n_neg)


def auprc(scores, labels) -> float:
    """Step-wise average precision over tie groups."""
    s, y = _check(scores, labels)
    tp, fp = _threshold_groups(s, y)
    precision = tp / (tp + fp)
    gained = np.diff(np.r_[0, tp])
    return float(np.sum(gained * precision) / tp[-1])


def fpr_at_tpr(scores, labels, tpr_target: float = 0.95) -> float:
    """Lowest FPR among thresholds ``score >= t`` whose TPR reaches the target."""
    if not 0 < tpr_target <= 1:
        raise InputError(f"tpr_target must be in (0, 1], got {tpr_target}")
    s, y = _check(scores, labels)
    tp, fp = _threshold_groups(s, y)
    n_pos, n_neg = tp[-1], fp[-1]
    first = int(np.argmax(tp / n_pos >= tpr_target))
    return float(fp[first] / n_neg)


def evaluate(scores, labels, tpr_target: float = 0.95) -> EvalReport:
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    return EvalReport(
        auroc(s, y), auprc(s, y), fpr_at_tpr(s, y, tpr_target), n_pos, len(y) - n_pos
    )
