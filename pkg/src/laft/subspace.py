"""Concept subspaces from pairwise differences of prompt embeddings.

The differences ``v_i - v_j`` (i < j) of all prompt embeddings are stacked and
their top right singular vectors become the concept axes. Differencing cancels
any offset shared by the prompts (a common template contribution) and the SVD
keeps only the dominant directions of variation between concept values.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from laft import _json
from laft.errors import InputError, NumericalError
from laft.prompts import fnv1a_64
from laft.tensor_io import EmbeddingMatrix, read_npy, write_npy

logger = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-6
DEFAULT_D = {"guide": 16, "ignore": 128}


@dataclass(frozen=True)
class DifferenceSet:
    """Rows ``v_i - v_j`` for all i < j in lexicographic (i, j) order."""

    diffs: np.ndarray
    n_inputs: int

    @property
    def dim(self) -> int:
        return self.diffs.shape[1]

    def __len__(self) -> int:
        return self.diffs.shape[0]


@dataclass(frozen=True)
class ConceptSubspace:
    """Orthonormal concept axes, one per row of ``basis`` (shape d x D)."""

    basis: np.ndarray
    source_digest: str = ""
    centered: bool = False
    singular_values: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        basis = np.array(self.basis, dtype=np.float64, order="C", copy=True)
        if basis.ndim != 2 or basis.shape[0] < 1:
            raise InputError(f"basis must be a non-empty 2-D matrix, got {basis.shape}")
        if basis.shape[0] > basis.shape[1]:
            raise InputError("d exceeds dimension")
        if not np.all(np.isfinite(basis)):
            raise InputError("basis contains NaN or Inf")
        gram = basis @ basis.T
        if np.max(np.abs(gram - np.eye(basis.shape[0]))) > ORTHONORMAL_TOL:
            raise InputError("basis not orthonormal")
        basis.flags.writeable = False
        object.__setattr__(self, "basis", basis)
        sv = tuple(float(s) for s in self.singular_values)
        if sv:
            if len(sv) != basis.shape[0]:
                raise InputError("singular_values length must equal d")
            if any(s < 0 for s in sv) or any(a < b for a, b in zip(sv, sv[1:])):
                raise InputError("singular_values must be non-negative and non-increasing")
        object.__setattr__(self, "singular_values", sv)

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def digest(self) -> str:
        """FNV-1a hash of the little-endian float64 basis bytes."""
        return fnv1a_64(np.ascontiguousarray(self.basis, dtype="<f8").tobytes())

    def projector(self) -> np.ndarray:
        """The D x D orthogonal projector onto the span of the basis."""
        return self.basis.T @ self.basis


def pairwise_differences(text_features) -> DifferenceSet:
    """All pairwise differences ``row_i - row_j`` for i < j."""
    x = text_features.data if isinstance(text_features, EmbeddingMatrix) else np.asarray(
        text_features, dtype=np.float64
    )
    n = x.shape[0]
    if x.ndim != 2 or n < 2:
        raise InputError("pairwise differences need at least 2 rows")
    i, j = np.triu_indices(n, k=1)
    return DifferenceSet(x[i] - x[j], n)


def _fix_signs(vt: np.ndarray) -> np.ndarray:
    # largest-magnitude coordinate positive; argmax picks the lowest index on ties
    idx = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vt * signs[:, None]


def extract_axes(
    diffs: DifferenceSet, d: int, centered: bool = False, source_digest: str = ""
) -> ConceptSubspace:
    """Top-``d`` right singular vectors of the difference matrix.

    Args:
        diffs: Output of :func:`pairwise_differences`.
        d: Number of axes to keep.
        centered: Subtract the mean difference before the decomposition.
        source_digest: Provenance stamp, usually :func:`laft.prompts.prompt_digest`.

    Raises:
        InputError: ``d`` out of range or all differences zero.
        NumericalError: The SVD did not converge.
    """
    x = np.asarray(diffs.diffs, dtype=np.float64)
    n_rows, dim = x.shape
    if d < 1:
        raise InputError(f"d must be >= 1, got {d}")
    if d > dim:
        raise InputError(f"d exceeds dimension: d={d} > D={dim}")
    if d > n_rows:
        raise InputError(f"d exceeds number of difference vectors: d={d} > {n_rows}")
    if not np.any(x):
        raise InputError("all differences are zero (identical prompts)")
    if centered:
        x = x - x.mean(axis=0, keepdims=True)
        if not np.any(x):
            raise InputError("centered differences are all zero")
    try:
        _, s, vt = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    if not np.all(np.isfinite(vt)):
        raise NumericalError("SVD produced non-finite values")
    basis = _fix_signs(vt[:d])
    return ConceptSubspace(basis, source_digest, centered, tuple(s[:d]))


def build_subspace(
    text_features, d: int, centered: bool = False, source_digest: str = ""
) -> ConceptSubspace:
    """Convenience: pairwise differences followed by axis extraction."""
    return extract_axes(pairwise_differences(text_features), d, centered, source_digest)


def _paths(prefix) -> tuple[Path, Path]:
    prefix = Path(prefix)
    return prefix.with_name(prefix.name + ".npy"), prefix.with_name(prefix.name + ".json")


def save_subspace(s: ConceptSubspace, path_prefix) -> None:
    npy_path, json_path = _paths(path_prefix)
    write_npy(npy_path, s.basis)
    _json.write_json(
        json_path,
        {
            "d": s.d,
            "centered": s.centered,
            "source_digest": s.source_digest,
            "singular_values": list(s.singular_values),
        },
    )


def load_subspace(path_prefix) -> ConceptSubspace:
    npy_path, json_path = _paths(path_prefix)
    if not json_path.is_file():
        raise InputError(f"missing subspace sidecar: {json_path}")
    if not npy_path.is_file():
        raise InputError(f"missing subspace basis: {npy_path}")
    meta = json.loads(json_path.read_text(encoding="utf-8"))
    basis = read_npy(npy_path)
    if meta.get("d") != basis.shape[0]:
        raise InputError(
            f"{json_path}: sidecar d={meta.get('d')} but basis has {basis.shape[0]} rows"
        )
    try:
        return ConceptSubspace(
            basis,
            str(meta.get("source_digest", "")),
            bool(meta.get("centered", False)),
            tuple(meta.get("singular_values", ())),
        )
    except InputError as exc:
        raise InputError(f"{npy_path}: {exc}") from None
