"""Slow, independent reference implementations used as test oracles.

These deliberately avoid the package's vectorized code paths: plain Python
loops, explicit enumeration, and full sorts.
"""

from __future__ import annotations

import math


def _dot(u, v) -> float:
    return math.fsum(float(a) * float(b) for a, b in zip(u, v))


def cosine(u, v) -> float:
    nu, nv = math.sqrt(_dot(u, u)), math.sqrt(_dot(v, v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return _dot(u, v) / (nu * nv)


def knn_full_sort(reference, test, k):
    """Per test row: (sorted top-k indices, top-k sims, score) via a full sort."""
    out = []
    for t in test:
        sims = [(cosine(t, r), i) for i, r in enumerate(reference)]
        sims.sort(key=lambda p: (-p[0], p[1]))
        top = sims[:k]
        out.append(([i for _, i in top], [s for s, _ in top], 1.0 - math.fsum(s for s, _ in top) / k))
    return out


def auroc_pairs(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = ties = 0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1
            elif p == n:
                ties += 1
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def _counts_at(scores, labels, t):
    tp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 1)
    fp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 0)
    return tp, fp


def average_precision_walk(scores, labels) -> float:
    """Sum over distinct thresholds (descending) of recall gain x precision."""
    n_pos = sum(labels)
    ap, prev_recall = 0.0, 0.0
    for t in sorted(set(scores), reverse=True):
        tp, fp = _counts_at(scores, labels, t)
        recall = tp / n_pos
        ap += (recall - prev_recall) * (tp / (tp + fp))
        prev_recall = recall
    return ap


def fpr_at_tpr_enumerate(scores, labels, target=0.95) -> float:
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    best_t = None
    for t in set(scores):
        tp, _ = _counts_at(scores, labels, t)
        if tp / n_pos >= target and (best_t is None or t > best_t):
            best_t = t
    _, fp = _counts_at(scores, labels, best_t)
    return fp / n_neg
