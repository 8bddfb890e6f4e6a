"""Container types and file I/O shared by every other module.

All containers wrap immutable float64/int64 numpy arrays and validate
their structural invariants at construction. Probability normalization
is deliberately *not* enforced at construction: files and intermediate
results may hold denormalized rows, and :func:`validate_prob_matrix`
reports them row by row instead of raising.

Binary format "UQT1" (little endian throughout):

====== ======================================================
offset content
====== ======================================================
0      magic ``0x55 0x51 0x54 0x31`` (``b"UQT1"``)
4      u8 kind: 1 = matrix, 2 = stack, 3 = labels
5      u8 reserved x3 (zero)
8      u64 dims: matrix ``(n, c)``; stack ``(F, n, c)``;
       labels ``(n, c)``
...    payload: f64 row-major (matrix, stack) or u32 (labels)
====== ======================================================

CSV holds matrices as plain comma-separated rows and label vectors as
``index,label`` rows behind a header. CSV does not record the class
count, so reading labels infers ``c = max(label) + 1`` unless the caller
passes ``num_classes``. Stacks are binary-only.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "LabelVector",
    "ProbMatrix",
    "McdStack",
    "CorruptionMask",
    "FlagSet",
    "TensorIOError",
    "MalformedHeaderError",
    "DimensionMismatchError",
    "NonFiniteValueError",
    "validate_prob_matrix",
    "read_tensor",
    "write_tensor",
]

MAGIC = b"UQT1"
KIND_MATRIX = 1
KIND_STACK = 2
KIND_LABELS = 3


class TensorIOError(Exception):
    """Base for tensor file errors."""


class MalformedHeaderError(TensorIOError):
    pass


class DimensionMismatchError(TensorIOError):
    pass


class NonFiniteValueError(TensorIOError, ValueError):
    # doubles as a ValueError: raised both by file reads and by container
    # constructors handed non-finite data
    pass


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LabelVector:
    """Given labels for ``n`` samples, each in ``{0..num_classes-1}``."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a non-empty 1-D sequence")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise ValueError("label outside {0..num_classes-1}")
        object.__setattr__(self, "labels", _as_readonly(labels))

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True, eq=False)
class ProbMatrix:
    """n x c matrix of predicted probabilities, one row per sample."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError("values must be a 2-D matrix with n >= 1, c >= 1")
        if not np.isfinite(values).all():
            raise NonFiniteValueError("probability matrix contains non-finite values")
        object.__setattr__(self, "values", _as_readonly(values))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def c(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class McdStack:
    """F probability matrices of identical shape, one per forward pass."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3 or values.shape[0] < 1:
            raise ValueError("values must be a 3-D (F, n, c) array with F >= 1")
        if values.shape[1] < 1 or values.shape[2] < 1:
            raise ValueError("each pass must be a valid n x c matrix")
        if not np.isfinite(values).all():
            raise NonFiniteValueError("stack contains non-finite values")
        object.__setattr__(self, "values", _as_readonly(values))

    @classmethod
    def from_passes(cls, passes: Sequence[ProbMatrix]) -> "McdStack":
        shapes = {p.values.shape for p in passes}
        if len(shapes) != 1:
            raise DimensionMismatchError("all passes must share (n, c)")
        return cls(np.stack([p.values for p in passes]))

    @property
    def num_passes(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def c(self) -> int:
        return self.values.shape[2]

    def __getitem__(self, f: int) -> ProbMatrix:
        return ProbMatrix(self.values[f])


@dataclass(frozen=True, eq=False)
class CorruptionMask:
    """Which samples had their label flipped, plus the pre-flip labels."""

    flipped: np.ndarray
    original_labels: LabelVector

    def __post_init__(self):
        flipped = np.asarray(self.flipped, dtype=bool)
        if flipped.ndim != 1 or flipped.shape[0] != self.original_labels.n:
            raise ValueError("flipped mask must align with original labels")
        object.__setattr__(self, "flipped", _as_readonly(flipped))

    @property
    def n(self) -> int:
        return self.flipped.shape[0]

    @property
    def flipped_indices(self) -> np.ndarray:
        return np.flatnonzero(self.flipped)

    @property
    def num_flipped(self) -> int:
        return int(self.flipped.sum())


@dataclass(frozen=True, eq=False)
class FlagSet:
    """Sorted, de-duplicated indices of samples flagged as label errors."""

    indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=np.int64))
        if idx.size and idx[0] < 0:
            raise ValueError("flag indices must be non-negative")
        object.__setattr__(self, "indices", _as_readonly(idx))

    @classmethod
    def from_iterable(cls, indices: Iterable[int], n: int | None = None) -> "FlagSet":
        fs = cls(np.fromiter(indices, dtype=np.int64))
        if n is not None and fs.indices.size and fs.indices[-1] >= n:
            raise ValueError(f"flag index {fs.indices[-1]} out of range for n={n}")
        return fs

    def to_mask(self, n: int) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        mask[self.indices] = True
        return mask

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __contains__(self, index: int) -> bool:
        pos = np.searchsorted(self.indices, index)
        return pos < self.indices.size and self.indices[pos] == index

    def __iter__(self):
        return iter(self.indices.tolist())


Tensor = Union[ProbMatrix, McdStack, LabelVector]


def validate_prob_matrix(P: ProbMatrix, tol: float = 1e-6) -> list[tuple[int, float]]:
    """Report rows violating normalization or the [0, 1] entry range.

    Returns a list of ``(row_index, row_sum)`` pairs; an empty list means
    the matrix is valid at the given tolerance.
    """
    values = P.values
    sums = values.sum(axis=1)
    bad_sum = np.abs(sums - 1.0) > tol
    bad_entry = (values < -tol).any(axis=1) | (values > 1.0 + tol).any(axis=1)
    rows = np.flatnonzero(bad_sum | bad_entry)
    return [(int(r), float(sums[r])) for r in rows]


# --- binary format ---------------------------------------------------------

def _pack_header(kind: int, dims: tuple[int, ...]) -> bytes:
    return MAGIC + struct.pack("<B3x", kind) + struct.pack(f"<{len(dims)}Q", *dims)


def _write_binary(value: Tensor, path: Path) -> None:
    if isinstance(value, ProbMatrix):
        header = _pack_header(KIND_MATRIX, value.values.shape)
        payload = value.values.astype("<f8").tobytes()
    elif isinstance(value, McdStack):
        header = _pack_header(KIND_STACK, value.values.shape)
        payload = value.values.astype("<f8").tobytes()
    elif isinstance(value, LabelVector):
        header = _pack_header(KIND_LABELS, (value.n, value.num_classes))
        payload = value.labels.astype("<u4").tobytes()
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")
    path.write_bytes(header + payload)


def _read_binary(path: Path) -> Tensor:
    raw = path.read_bytes()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise MalformedHeaderError(f"{path}: not a UQT1 file")
    kind = raw[4]
    if kind == KIND_MATRIX:
        n_dims, dtype, builder = 2, "<f8", ProbMatrix
    elif kind == KIND_STACK:
        n_dims, dtype, builder = 3, "<f8", McdStack
    elif kind == KIND_LABELS:
        n_dims, dtype, builder = 2, "<u4", None
    else:
        raise MalformedHeaderError(f"{path}: unknown kind byte {kind}")
    header_len = 8 + 8 * n_dims
    if len(raw) < header_len:
        raise MalformedHeaderError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{n_dims}Q", raw, 8)
    if kind == KIND_LABELS:
        count = dims[0]
    else:
        count = int(np.prod(dims))
    payload = np.frombuffer(raw, dtype=dtype, offset=header_len)
    if payload.size != count:
        raise DimensionMismatchError(
            f"{path}: header promises {count} values, payload holds {payload.size}"
        )
    if kind == KIND_LABELS:
        return LabelVector(payload.astype(np.int64), num_classes=int(dims[1]))
    data = payload.astype(np.float64).reshape(dims)
    if not np.isfinite(data).all():
        raise NonFiniteValueError(f"{path}: payload contains non-finite values")
    return builder(data)


# --- CSV format ------------------------------------------------------------

_LABEL_HEADER = "index,label"


def _write_csv(value: Tensor, path: Path) -> None:
    if isinstance(value, ProbMatrix):
        lines = [",".join(repr(float(v)) for v in row) for row in value.values]
    elif isinstance(value, LabelVector):
        lines = [_LABEL_HEADER] + [f"{i},{int(v)}" for i, v in enumerate(value.labels)]
    elif isinstance(value, McdStack):
        raise TensorIOError("stacks are binary-only; CSV has no stack layout")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")
    path.write_text("\n".join(lines) + "\n")


def _read_csv(path: Path, num_classes: int | None = None) -> Tensor:
    text = path.read_text().strip()
    if not text:
        raise MalformedHeaderError(f"{path}: empty file")
    lines = text.splitlines()
    if lines[0].strip().lower() == _LABEL_HEADER:
        labels = []
        for ln in lines[1:]:
            _, lab = ln.split(",")
            labels.append(int(lab))
        labels = np.asarray(labels, dtype=np.int64)
        c = num_classes if num_classes is not None else int(labels.max()) + 1
        return LabelVector(labels, num_classes=max(c, 2))
    try:
        rows = [[float(v) for v in ln.split(",")] for ln in lines]
    except ValueError as exc:
        raise MalformedHeaderError(f"{path}: not numeric CSV ({exc})") from exc
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DimensionMismatchError(f"{path}: ragged rows {sorted(widths)}")
    data = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(data).all():
        raise NonFiniteValueError(f"{path}: contains non-finite values")
    return ProbMatrix(data)


def write_tensor(value: Tensor, path, format: str = "binary") -> None:
    path = Path(path)
    if format == "binary":
        _write_binary(value, path)
    elif format == "csv":
        _write_csv(value, path)
    else:
        raise ValueError(f"unknown format {format!r}")


def read_tensor(path, format: str = "binary", num_classes: int | None = None) -> Tensor:
    path = Path(path)
    if format == "binary":
        return _read_binary(path)
    if format == "csv":
        return _read_csv(path, num_classes=num_classes)
    raise ValueError(f"unknown format {format!r}")
