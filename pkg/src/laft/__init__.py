"""Language-assisted feature transforms (LAFT) for kNN anomaly detection.

Prompt embeddings define a concept subspace; image embeddings are projected
onto it (guide) or onto its orthogonal complement (ignore) before scoring
against normal data with exact cosine kNN.
"""

from laft.errors import InputError, LaftError, NumericalError
from laft.metrics import EvalReport, auprc, auroc, evaluate, fpr_at_tpr
from laft.prompts import PromptSet, prompt_digest, render_prompts
from laft.scoring import ScoreReport, ScoringConfig, score, score_pipeline
from laft.subspace import (
    ConceptSubspace,
    DifferenceSet,
    build_subspace,
    extract_axes,
    load_subspace,
    pairwise_differences,
    save_subspace,
)
from laft.tensor_io import (
    EmbeddingMatrix,
    LabeledSet,
    load_labeled_set,
    load_matrix,
    save_matrix,
)
from laft.transform import TransformSpec, apply_transform, guide, ignore

__version__ = "0.1.0"

__all__ = [
    "ConceptSubspace",
    "DifferenceSet",
    "EmbeddingMatrix",
    "EvalReport",
    "InputError",
    "LabeledSet",
    "LaftError",
    "NumericalError",
    "PromptSet",
    "ScoreReport",
    "ScoringConfig",
    "TransformSpec",
    "apply_transform",
    "auprc",
    "auroc",
    "build_subspace",
    "evaluate",
    "extract_axes",
    "fpr_at_tpr",
    "guide",
    "ignore",
    "load_labeled_set",
    "load_matrix",
    "load_subspace",
    "pairwise_differences",
    "prompt_digest",
    "render_prompts",
    "save_matrix",
    "save_subspace",
    "score",
    "score_pipeline",
]
