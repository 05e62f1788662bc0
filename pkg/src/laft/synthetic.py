"""Seeded synthetic worlds of paired image/text embeddings with known attributes.

Every attribute owns a disjoint block of ``q`` columns of a random orthonormal
frame, and every attribute value is a fixed unit vector inside its block. An
"image" is the weighted sum of its value vectors plus isotropic noise; a
"prompt" embedding is its value vector plus a per-template offset shared by
all values, plus noise. All vectors are L2-normalized.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from laft.errors import InputError
from laft.prompts import PromptSet, render_prompts
from laft.tensor_io import EmbeddingMatrix, LabeledSet, normalize_rows

_TEMPLATES = (
    "a photo of a {}.",
    "an image of a {}.",
    "a picture of the {}.",
    "a rendering of a {}.",
    "a close-up photo of a {}.",
    "a cropped photo of the {}.",
    "a bright photo of a {}.",
    "a low resolution photo of the {}.",
)


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    values: tuple[str, ...]
    q: int = 4
    weight: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(str(v) for v in self.values))
        if len(self.values) < 2:
            raise InputError(f"attribute {self.name!r} needs at least 2 values")
        if len(set(self.values)) != len(self.values):
            raise InputError(f"attribute {self.name!r} has duplicate values")
        if self.q < 1:
            raise InputError(f"attribute {self.name!r}: q must be >= 1")


@dataclass(frozen=True)
class SyntheticSpec:
    """Attribute model of a synthetic world.

    Attributes:
        attributes: One entry per attribute, each with its own column block.
        dim: Ambient embedding dimension.
        noise_sigma: Std of the isotropic Gaussian noise on images and prompts.
        template_noise: Scale of the per-template offset added to prompts.
        templates: Number of prompt templates per attribute value.
        seed: Seed for every random draw.
    """

    attributes: tuple[AttributeSpec, ...]
    dim: int = 128
    noise_sigma: float = 0.05
    template_noise: float = 0.1
    templates: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        attrs = tuple(
            a if isinstance(a, AttributeSpec) else AttributeSpec(**a) for a in self.attributes
        )
        object.__setattr__(self, "attributes", attrs)
        if not attrs:
            raise InputError("at least one attribute is required")
        names = [a.name for a in attrs]
        if len(set(names)) != len(names):
            raise InputError("attribute names must be unique")
        if sum(a.q for a in attrs) > self.dim:
            raise InputError(
                f"attribute blocks overflow: sum of q = {sum(a.q for a in attrs)} > dim = {self.dim}"
            )
        if self.noise_sigma < 0 or self.template_noise < 0:
            raise InputError("noise levels must be non-negative")
        if self.templates < 1:
            raise InputError("templates must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> SyntheticSpec:
        raw = dict(raw)
        raw.pop("normal_values", None)
        attrs = tuple(
            AttributeSpec(
                name=a["name"],
                values=tuple(a["values"]),
                q=int(a.get("q", 4)),
                weight=float(a.get("weight", 1.0)),
            )
            for a in raw.pop("attributes")
        )
        return cls(attributes=attrs, **raw)

    def attribute(self, name: str) -> AttributeSpec:
        for a in self.attributes:
            if a.name == name:
                return a
        raise InputError(f"unknown attribute {name!r}")


def template_strings(count: int) -> list[str]:
    out = list(_TEMPLATES[:count])
    out += [f"a photo of a {{}}, variant {i}." for i in range(len(out), count)]
    return out


@dataclass(frozen=True)
class SyntheticWorld:
    """Generated embeddings.

    Attributes:
        spec: The generating spec.
        cells: Value-index tuples, one per attribute combination, in product order.
        fit: Per-cell pool used for training sets.
        eval: Per-cell pool used for test sets; drawn independently of ``fit``.
        prompts: Per-attribute prompt grid.
        text: Per-attribute prompt embeddings, rows aligned with ``prompts[name].rendered``.
        value_vectors: Per-attribute (V, D) unit vectors of the attribute values.
        frame: The (D, D) orthonormal frame; attribute blocks are column slices.
    """

    spec: SyntheticSpec
    cells: tuple[tuple[int, ...], ...]
    fit: dict
    eval: dict
    prompts: dict
    text: dict
    value_vectors: dict
    frame: np.ndarray = field(repr=False)

    def block(self, name: str) -> np.ndarray:
        """Orthonormal columns (D, q) spanning an attribute's block."""
        start = 0
        for a in self.spec.attributes:
            if a.name == name:
                return self.frame[:, start : start + a.q]
            start += a.q
        raise InputError(f"unknown attribute {name!r}")


def _cell_name(spec: SyntheticSpec, cell: tuple[int, ...]) -> str:
    return "|".join(f"{a.name}={a.values[i]}" for a, i in zip(spec.attributes, cell))


def generate_world(spec: SyntheticSpec, samples_per_cell: int) -> SyntheticWorld:
    """Draw a world; equal spec and seed give bitwise-equal output."""
    if samples_per_cell < 1:
        raise InputError("samples_per_cell must be >= 1")
    rng = np.random.default_rng(spec.seed)
    dim, sigma = spec.dim, spec.noise_sigma

    q_mat, r_mat = np.linalg.qr(rng.standard_normal((dim, dim)))
    frame = q_mat * np.sign(np.diag(r_mat))

    value_vectors = {}
    start = 0
    for a in spec.attributes:
        block = frame[:, start : start + a.q]
        g = rng.standard_normal((len(a.values), a.q))
        value_vectors[a.name] = (g / np.linalg.norm(g, axis=1, keepdims=True)) @ block.T
        start += a.q

    offsets = rng.standard_normal((spec.templates, dim))
    offsets /= np.linalg.norm(offsets, axis=1, keepdims=True)
    templates = template_strings(spec.templates)

    prompts, text = {}, {}
    for a in spec.attributes:
        ps = render_prompts(templates, a.values)
        u = np.repeat(value_vectors[a.name], spec.templates, axis=0)
        r = np.tile(offsets, (len(a.values), 1))
        raw = u + spec.template_noise * r + sigma * rng.standard_normal(u.shape)
        prompts[a.name] = ps
        text[a.name] = EmbeddingMatrix(normalize_rows(raw), normalized=True)

    cells = tuple(itertools.product(*(range(len(a.values)) for a in spec.attributes)))
    fit, ev = {}, {}
    for cell in cells:
        signal = sum(
            a.weight * value_vectors[a.name][i] for a, i in zip(spec.attributes, cell)
        )
        name = _cell_name(spec, cell)
        for pool, tag in ((fit, "fit"), (ev, "eval")):
            x = signal + sigma * rng.standard_normal((samples_per_cell, dim))
            names = [f"{name}#{tag}{i}" for i in range(samples_per_cell)]
            pool[cell] = LabeledSet(EmbeddingMatrix(normalize_rows(x), normalized=True), None, names)

    return SyntheticWorld(spec, cells, fit, ev, prompts, text, value_vectors, frame)


def _normal_indices(spec: SyntheticSpec, normal_values: dict) -> list[set[int]]:
    out = []
    for a in spec.attributes:
        if a.name not in normal_values:
            raise InputError(f"no normal values given for attribute {a.name!r}")
        picked = set()
        for v in normal_values[a.name]:
            if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
                if not 0 <= v < len(a.values):
                    raise InputError(f"{a.name}: value index {v} out of range")
                picked.add(int(v))
            elif v in a.values:
                picked.add(a.values.index(v))
            else:
                raise InputError(f"{a.name}: unknown value {v!r}")
        if not picked:
            raise InputError(f"{a.name}: at least one normal value is required")
        out.append(picked)
    unknown = set(normal_values) - {a.name for a in spec.attributes}
    if unknown:
        raise InputError(f"unknown attributes in normal_values: {sorted(unknown)}")
    return out


def make_split(
    world: SyntheticWorld, normal_values: dict
) -> tuple[LabeledSet, LabeledSet, dict[str, np.ndarray]]:
    """Train on all-normal cells, test on every cell.

    Train rows come from the ``fit`` pools of cells whose every attribute value
    is normal. Test rows are the ``eval`` pools of all cells in product order.
    The test labels are 1 when any attribute is anomalous; ``per_attribute``
    maps each attribute name to labels that look at that attribute alone.
    """
    spec = world.spec
    normal = _normal_indices(spec, normal_values)
    anomaly_flags = lambda cell: tuple(int(i not in ok) for i, ok in zip(cell, normal))  # noqa: E731

    train_cells = [c for c in world.cells if not any(anomaly_flags(c))]
    if not train_cells:
        raise InputError("no cell is normal in every attribute")
    train_x = np.vstack([world.fit[c].embeddings.data for c in train_cells])
    train_names = [n for c in train_cells for n in world.fit[c].names]
    train = LabeledSet(
        EmbeddingMatrix(train_x, normalized=True), np.zeros(len(train_x), np.int64), train_names
    )

    test_x, test_names, flags = [], [], []
    for c in world.cells:
        pool = world.eval[c]
        test_x.append(pool.embeddings.data)
        test_names.extend(pool.names)
        flags.extend([anomaly_flags(c)] * pool.embeddings.rows)
    flags = np.asarray(flags, dtype=np.int64)
    test = LabeledSet(
        EmbeddingMatrix(np.vstack(test_x), normalized=True), flags.max(axis=1), test_names
    )
    per_attribute = {a.name: flags[:, j].copy() for j, a in enumerate(spec.attributes)}
    return train, test, per_attribute


def load_spec_file(path) -> tuple[SyntheticSpec, dict]:
    """Read a spec JSON; returns the spec and its ``normal_values`` map.

    ``normal_values`` defaults to the first value of every attribute.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"spec file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    try:
        spec = SyntheticSpec.from_dict(raw)
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: invalid spec ({exc})") from None
    normal = raw.get("normal_values") or {a.name: [a.values[0]] for a in spec.attributes}
    return spec, normal
