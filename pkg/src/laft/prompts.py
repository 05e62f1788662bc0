"""Prompt grids: the cross product of templates and concept values."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from laft.errors import InputError

PLACEHOLDER = "{}"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class PromptSet:
    """Rendered prompts in value-major order.

    ``rendered[i]`` is ``templates[i % T]`` filled with ``values[i // T]``, so
    all templates for the first value come first. Prompt embeddings handed to
    the subspace builder must follow this exact row order.
    """

    templates: tuple[str, ...]
    values: tuple[str, ...]
    rendered: tuple[str, ...]

    @property
    def n_templates(self) -> int:
        return len(self.templates)

    @property
    def n_values(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.rendered)


def render_prompts(templates, values) -> PromptSet:
    templates = tuple(str(t) for t in templates)
    values = tuple(str(v) for v in values)
    if not templates:
        raise InputError("at least one template is required")
    for t in templates:
        count = t.count(PLACEHOLDER)
        if count != 1:
            raise InputError(
                f"template {t!r} must contain exactly one '{{}}' placeholder, found {count}"
            )
    if len(values) < 2:
        raise InputError("at least two concept values are required")
    rendered = tuple(t.replace(PLACEHOLDER, v) for v in values for t in templates)
    return PromptSet(templates, values, rendered)


def fnv1a_64(data: bytes) -> str:
    """64-bit FNV-1a hash as 16 lowercase hex characters."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return f"{h:016x}"


def prompt_digest(p: PromptSet) -> str:
    return fnv1a_64("\n".join(p.rendered).encode("utf-8"))


def load_prompt_file(path) -> PromptSet:
    """Read ``{"templates": [...], "values": [...]}`` and render it."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"prompts file not found: {path}")
    try:
        spec = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(spec, dict) or "templates" not in spec or "values" not in spec:
        raise InputError(f"{path}: prompt file needs 'templates' and 'values'")
    return render_prompts(spec["templates"], spec["values"])


def average_templates(features: np.ndarray, prompts: PromptSet) -> np.ndarray:
    """Average the T template embeddings of each value (value-major input).

    Returns a (V, D) array. The averages are not re-normalized.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] != len(prompts):
        raise InputError(
            f"{features.shape[0]} prompt embeddings for {len(prompts)} rendered prompts"
        )
    return features.reshape(prompts.n_values, prompts.n_templates, -1).mean(axis=1)
