"""Exact k-nearest-neighbour cosine scoring against normal reference features.

The anomaly score of a test vector is ``1 - mean`` of its ``k`` largest cosine
similarities to the reference set, so higher means more anomalous. A mean
similarity is itself a normality measure; the affine flip only reverses the
ranking, so AUROC with label 1 = anomalous keeps its usual meaning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from laft.errors import InputError
from laft.tensor_io import EmbeddingMatrix
from laft.transform import TransformSpec, apply_transform

DEFAULT_K = 30


@dataclass(frozen=True)
class ScoringConfig:
    k: int = DEFAULT_K

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InputError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class ScoreReport:
    """Per-test-row anomaly scores in [0, 2].

    Attributes:
        scores: One score per test row.
        k: Neighbour count used.
        transform: Digest chain of the transform applied, empty if none.
        neighbors: (rows, k) reference indices, most similar first.
        labels: Optional 0/1 labels carried along for evaluation.
    """

    scores: np.ndarray
    k: int
    transform: str = ""
    neighbors: np.ndarray | None = None
    labels: np.ndarray | None = None

    def to_json(self) -> dict:
        return {"scores": [float(s) for s in self.scores], "k": self.k, "transform": self.transform}


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    # zero vectors stay zero, giving cosine similarity 0 against anything
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def cosine_similarity(test: np.ndarray, reference: np.ndarray) -> np.ndarray:
    return _unit_rows(np.asarray(test, dtype=np.float64)) @ _unit_rows(
        np.asarray(reference, dtype=np.float64)
    ).T


def top_k(sims: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Largest ``k`` entries per row, ties broken by lower column index."""
    # stable sort on the negated values keeps lower indices first among equals
    order = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(sims, order, axis=1)


def score(
    reference: EmbeddingMatrix,
    test: EmbeddingMatrix,
    cfg: ScoringConfig = ScoringConfig(),
    transform: str = "",
) -> ScoreReport:
    """Score every test row by its kNN cosine similarity to ``reference``."""
    if reference.dim != test.dim:
        raise InputError(
            f"dimension mismatch: reference D={reference.dim}, test D={test.dim}"
        )
    if cfg.k > reference.rows:
        raise InputError(f"k exceeds reference size: k={cfg.k} > {reference.rows}")
    sims = cosine_similarity(test.data, reference.data)
    idx, top = top_k(sims, cfg.k)
    scores = np.clip(1.0 - top.mean(axis=1), 0.0, 2.0)
    return ScoreReport(scores, cfg.k, transform, idx)


def score_pipeline(
    train: EmbeddingMatrix,
    test: EmbeddingMatrix,
    t: TransformSpec,
    cfg: ScoringConfig = ScoringConfig(),
) -> ScoreReport:
    """Transform both sets with ``t`` and score ``test`` against ``train``."""
    return score(apply_transform(train, t), apply_transform(test, t), cfg, t.describe())
