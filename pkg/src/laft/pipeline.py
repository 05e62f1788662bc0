"""End-to-end runs: prompts -> subspace -> transform -> kNN scores -> metrics."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from laft import _json
from laft.errors import InputError
from laft.metrics import evaluate
from laft.prompts import average_templates, load_prompt_file, prompt_digest
from laft.scoring import DEFAULT_K, ScoringConfig, score
from laft.subspace import ConceptSubspace, build_subspace, save_subspace
from laft.tensor_io import EmbeddingMatrix, LabeledSet, load_labeled_set, load_matrix, save_matrix
from laft.transform import MODES, TransformSpec, apply_transform

logger = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    prompts: Path
    text_features: Path
    train: Path
    test: Path
    mode: str = "guide"
    d: int = 16
    centered: bool = False
    k: int = DEFAULT_K
    average_templates: bool = False
    normalize: bool = True
    extra_labels: dict[str, Path] = field(default_factory=dict)


def concept_features(prompts_path, text_path, average: bool = False, normalize: bool = True):
    """Text features ready for differencing, plus the prompt digest."""
    prompts = load_prompt_file(prompts_path)
    text = load_matrix(text_path, normalize=normalize)
    if text.rows != len(prompts):
        raise InputError(
            f"{text_path}: {text.rows} text embeddings but {len(prompts)} rendered prompts"
        )
    features = average_templates(text.data, prompts) if average else text.data
    return features, prompt_digest(prompts)


def subspace_from_files(
    prompts_path,
    text_path,
    d: int,
    centered: bool = False,
    average: bool = False,
    normalize: bool = True,
) -> ConceptSubspace:
    features, digest = concept_features(prompts_path, text_path, average, normalize)
    return build_subspace(features, d, centered, digest)


def load_features(path, normalize: bool = True) -> LabeledSet:
    """An ``.npy`` array or a ``.json`` manifest."""
    path = Path(path)
    if path.suffix == ".json":
        return load_labeled_set(path, normalize=normalize)
    return LabeledSet(load_matrix(path, normalize=normalize))


def read_labels(manifest_path) -> np.ndarray:
    ls = load_labeled_set(manifest_path, normalize=False)
    if ls.labels is None:
        raise InputError(f"{manifest_path}: manifest has no labels")
    return ls.labels


def _metric_fields(scores, labels, suffix: str = "") -> dict:
    rep = evaluate(scores, labels).to_json()
    return {f"{k}{suffix}": v for k, v in rep.items()}


def _check_config(cfg: PipelineConfig, train: EmbeddingMatrix) -> None:
    if cfg.mode not in MODES:
        raise InputError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    ScoringConfig(cfg.k)
    if cfg.k > train.rows:
        raise InputError(f"k exceeds reference size: k={cfg.k} > {train.rows}")


def run_pipeline(cfg: PipelineConfig, out_dir=None) -> dict:
    """Run every stage; returns the report and, if ``out_dir``, writes artifacts.

    ``report.json`` is written last, so a failure at any stage leaves no report.
    """
    train = load_features(cfg.train, cfg.normalize)
    test = load_features(cfg.test, cfg.normalize)
    _check_config(cfg, train.embeddings)
    extra = {name: read_labels(p) for name, p in cfg.extra_labels.items()}
    for name, labels in extra.items():
        if len(labels) != test.embeddings.rows:
            raise InputError(f"label set {name!r}: label length mismatch")

    subspace = subspace_from_files(
        cfg.prompts, cfg.text_features, cfg.d, cfg.centered, cfg.average_templates, cfg.normalize
    )
    spec = TransformSpec.single(cfg.mode, subspace)
    train_t = apply_transform(train.embeddings, spec)
    test_t = apply_transform(test.embeddings, spec)
    result = score(train_t, test_t, ScoringConfig(cfg.k), spec.describe())

    report = {
        "mode": cfg.mode,
        "d": cfg.d,
        "k": cfg.k,
        "centered": cfg.centered,
        "average_templates": cfg.average_templates,
        "prompt_digest": subspace.source_digest,
        "subspace_digest": subspace.digest,
        "transform": spec.describe(),
        "n_train": train.embeddings.rows,
        "n_test": test.embeddings.rows,
    }
    if test.labels is not None:
        report.update(_metric_fields(result.scores, test.labels))
    for name, labels in extra.items():
        report.update(_metric_fields(result.scores, labels, f"_{name}"))

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_subspace(subspace, out / "subspace")
        save_matrix(train_t, out / "train_transformed.npy")
        save_matrix(test_t, out / "test_transformed.npy")
        _json.write_json(out / "scores.json", result.to_json())
        _json.write_json(out / "report.json", report)
    return report


def sweep_d(cfg: PipelineConfig, d_list, labels=None) -> list[dict]:
    """One metrics row per ``d``; duplicates are dropped with a warning."""
    d_list = [int(d) for d in d_list]
    if not d_list:
        raise InputError("d list is empty")
    unique = list(dict.fromkeys(d_list))
    if len(unique) != len(d_list):
        logger.warning("duplicate d values removed: %s -> %s", d_list, unique)

    train = load_features(cfg.train, cfg.normalize)
    test = load_features(cfg.test, cfg.normalize)
    _check_config(cfg, train.embeddings)
    if labels is None:
        labels = test.labels
    if labels is None:
        raise InputError("sweep needs labels: the test manifest has none")
    features, digest = concept_features(cfg.prompts, cfg.text_features, cfg.average_templates, cfg.normalize)

    rows = []
    for d in unique:
        subspace = build_subspace(features, d, cfg.centered, digest)
        spec = TransformSpec.single(cfg.mode, subspace)
        res = score(
            apply_transform(train.embeddings, spec),
            apply_transform(test.embeddings, spec),
            ScoringConfig(cfg.k),
        )
        rep = evaluate(res.scores, labels)
        rows.append({"d": d, "auroc": rep.auroc, "auprc": rep.auprc, "fpr95": rep.fpr95})
    return rows


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["d", "auroc", "auprc", "fpr95"])
    for r in rows:
        writer.writerow([r["d"]] + [format(r[k], ".17g") for k in ("auroc", "auprc", "fpr95")])
    return buf.getvalue()
