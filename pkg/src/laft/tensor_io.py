"""Embedding matrices on disk: a strict NPY v1.0 subset plus JSON manifests.

Only 2-D, C-order, little-endian ``<f4``/``<f8`` arrays are accepted. Values
are promoted to float64 on load and the writer always emits ``<f8``, so a
save/load round trip is bit-exact.
"""

from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from laft.errors import InputError

NPY_MAGIC = b"\x93NUMPY"
_VERSION = b"\x01\x00"
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}
NORM_TOL = 1e-6


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Dense row-major float64 matrix of feature vectors.

    Attributes:
        data: Array of shape (rows, dim). Made read-only on construction.
        normalized: True when every row was L2-normalized.
    """

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 2:
            raise InputError(f"expected a 2-D matrix, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise InputError("empty matrix")
        if arr.shape[1] < 2:
            raise InputError(f"dimension must be >= 2, got {arr.shape[1]}")
        if not np.all(np.isfinite(arr)):
            raise InputError("matrix contains NaN or Inf")
        if self.normalized:
            norms = np.linalg.norm(arr, axis=1)
            if np.any(np.abs(norms - 1.0) > NORM_TOL):
                raise InputError("rows flagged normalized but not unit-norm")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, array, normalize: bool = False) -> EmbeddingMatrix:
        arr = np.asarray(array, dtype=np.float64)
        if normalize:
            arr = normalize_rows(arr)
        return cls(arr, normalized=normalize)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.rows


@dataclass(frozen=True)
class LabeledSet:
    """Embeddings with optional per-row anomaly labels (1 = anomalous) and names."""

    embeddings: EmbeddingMatrix
    labels: np.ndarray | None = None
    names: list[str] | None = field(default=None)

    def __post_init__(self) -> None:
        n = self.embeddings.rows
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or len(labels) != n:
                raise InputError(
                    f"label length mismatch: {len(labels)} labels for {n} rows"
                )
            if not np.all((labels == 0) | (labels == 1)):
                raise InputError("labels must be 0 (normal) or 1 (anomalous)")
            labels = labels.astype(np.int64)
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)
        if self.names is not None:
            if len(self.names) != n:
                raise InputError(
                    f"name length mismatch: {len(self.names)} names for {n} rows"
                )
            object.__setattr__(self, "names", [str(s) for s in self.names])


def normalize_rows(arr: np.ndarray) -> np.ndarray:
    """Divide each row by its L2 norm; a zero-norm row is an error."""
    arr = np.asarray(arr, dtype=np.float64)
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    if np.any(norms == 0):
        bad = int(np.flatnonzero(norms[:, 0] == 0)[0])
        raise InputError(f"zero-norm row {bad} cannot be normalized")
    return arr / norms


def _parse_header(raw: bytes, path) -> tuple[np.dtype, tuple[int, int]]:
    try:
        header = ast.literal_eval(raw.decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise InputError(f"{path}: malformed header") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise InputError(f"{path}: malformed header")
    descr = header["descr"]
    if descr not in _DTYPES:
        raise InputError(f"{path}: unsupported element type {descr!r}")
    if header["fortran_order"] is not False:
        raise InputError(f"{path}: fortran_order arrays are not supported")
    shape = header["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(s, int) and s >= 0 for s in shape):
        raise InputError(f"{path}: malformed header")
    if len(shape) != 2:
        raise InputError(f"{path}: expected 2-D array, got shape {shape}")
    return _DTYPES[descr], shape


def read_npy(path) -> np.ndarray:
    """Read a raw 2-D array from an NPY v1.0 file without validation of values."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 10 or blob[:6] != NPY_MAGIC:
        raise InputError(f"{path}: not an NPY file (bad magic)")
    if blob[6:8] != _VERSION:
        raise InputError(f"{path}: unsupported NPY version {blob[6]}.{blob[7]}")
    (hlen,) = struct.unpack("<H", blob[8:10])
    if len(blob) < 10 + hlen:
        raise InputError(f"{path}: malformed header")
    dtype, shape = _parse_header(blob[10 : 10 + hlen], path)
    payload = blob[10 + hlen :]
    expected = shape[0] * shape[1] * dtype.itemsize
    if len(payload) != expected:
        raise InputError(
            f"{path}: data size {len(payload)} does not match shape {shape}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(np.float64)


def write_npy(path, array: np.ndarray) -> None:
    """Write a 2-D array as little-endian float64 NPY v1.0."""
    arr = np.ascontiguousarray(array, dtype="<f8")
    if arr.ndim != 2:
        raise InputError(f"expected a 2-D matrix, got shape {arr.shape}")
    header = "{'descr': '<f8', 'fortran_order': False, 'shape': (%d, %d), }" % arr.shape
    # Pad so the data starts on a 64-byte boundary, header ends with newline.
    pad = -(10 + len(header) + 1) % 64
    header_bytes = (header + " " * pad + "\n").encode("latin1")
    with open(path, "wb") as fh:
        fh.write(NPY_MAGIC + _VERSION + struct.pack("<H", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(arr.tobytes(order="C"))


def load_matrix(path, normalize: bool = True) -> EmbeddingMatrix:
    """Load an embedding matrix, optionally L2-normalizing each row."""
    arr = read_npy(path)
    if arr.shape[0] == 0:
        raise InputError(f"{path}: empty matrix")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{path}: matrix contains NaN or Inf")
    try:
        return EmbeddingMatrix.from_array(arr, normalize=normalize)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def save_matrix(m: EmbeddingMatrix, path) -> None:
    write_npy(path, m.data)


def load_labeled_set(manifest_path, normalize: bool = True) -> LabeledSet:
    """Load a manifest ``{"embeddings": ..., "labels": [...]?, "names": [...]?}``.

    The embeddings path is resolved relative to the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path, encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{manifest_path}: invalid JSON ({exc})") from None
    if not isinstance(manifest, dict) or "embeddings" not in manifest:
        raise InputError(f"{manifest_path}: manifest needs an 'embeddings' key")
    emb = load_matrix(manifest_path.parent / manifest["embeddings"], normalize=normalize)
    labels = manifest.get("labels")
    if labels is not None:
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in labels):
            raise InputError(f"{manifest_path}: labels must be integers 0 or 1")
        labels = np.asarray(labels, dtype=np.int64)
    try:
        return LabeledSet(emb, labels, manifest.get("names"))
    except InputError as exc:
        raise InputError(f"{manifest_path}: {exc}") from None


def save_labeled_set(ls: LabeledSet, manifest_path, array_name: str | None = None) -> None:
    """Write ``ls`` as an array file next to a JSON manifest."""
    manifest_path = Path(manifest_path)
    array_name = array_name or manifest_path.with_suffix(".npy").name
    save_matrix(ls.embeddings, manifest_path.parent / array_name)
    manifest: dict = {"embeddings": array_name}
    if ls.labels is not None:
        manifest["labels"] = [int(x) for x in ls.labels]
    if ls.names is not None:
        manifest["names"] = list(ls.names)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh)
        fh.write("\n")
