"""Guide and ignore projections of embeddings against a concept subspace."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from laft.errors import InputError
from laft.subspace import ConceptSubspace
from laft.tensor_io import EmbeddingMatrix

Mode = Literal["guide", "ignore"]
MODES = ("guide", "ignore")


def _component(x: np.ndarray, s: ConceptSubspace) -> np.ndarray:
    if x.shape[1] != s.dim:
        raise InputError(f"dimension mismatch: features D={x.shape[1]}, subspace D={s.dim}")
    c = s.basis
    # <c_k, c_k> kept literal so slightly off-norm bases still project correctly
    coef = (x @ c.T) / np.einsum("kd,kd->k", c, c)
    return coef @ c


def guide(v: EmbeddingMatrix, s: ConceptSubspace) -> EmbeddingMatrix:
    """Project each row onto the concept subspace (keeps only the concept)."""
    return EmbeddingMatrix(_component(v.data, s), normalized=False)


def ignore(v: EmbeddingMatrix, s: ConceptSubspace) -> EmbeddingMatrix:
    """Remove each row's component inside the concept subspace."""
    return EmbeddingMatrix(v.data - _component(v.data, s), normalized=False)


@dataclass(frozen=True)
class TransformSpec:
    """Ordered (mode, subspace) steps, applied left to right."""

    steps: tuple[tuple[str, ConceptSubspace], ...]

    def __post_init__(self) -> None:
        steps = tuple((str(m), s) for m, s in self.steps)
        if not steps:
            raise InputError("transform needs at least one step")
        for mode, _ in steps:
            if mode not in MODES:
                raise InputError(f"unknown transform mode {mode!r}")
        dims = {s.dim for _, s in steps}
        if len(dims) != 1:
            raise InputError(f"subspaces disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def single(cls, mode: str, s: ConceptSubspace) -> TransformSpec:
        return cls(((mode, s),))

    @property
    def dim(self) -> int:
        return self.steps[0][1].dim

    def describe(self) -> str:
        """Digest chain like ``guide:0123abcd...;ignore:...``."""
        return ";".join(f"{mode}:{s.digest}" for mode, s in self.steps)


def apply_transform(v: EmbeddingMatrix, t: TransformSpec) -> EmbeddingMatrix:
    out = v
    for mode, s in t.steps:
        out = guide(out, s) if mode == "guide" else ignore(out, s)
    return out
