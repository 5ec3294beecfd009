"""Turn per-word frame matrices into fixed-dimensional embeddings.

Pipeline per word segment: slice frames -> standardize (optional) ->
PCA-project (optional) -> pool. Normalization always happens before PCA.
Four pooling functions are supported: mean, sum, element-wise max, and
subsampling (n equally spaced frames concatenated in temporal order).

Embedding sets serialize to an "AWEE" container that mirrors the feature
archive layout: label strings plus one float32 vector per item, with the
producing configuration echoed as a JSON string field.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .corpus import FeatureArchive, WordSegment, slice_frames
from .errors import ArchiveFormatError, AwepoolError, DataError, ShapeMismatchError

EMBEDDING_MAGIC = b"AWEE"
EMBEDDING_VERSION = 1

POOLING_KINDS = ("mean", "sum", "max", "subsample")

_EMB_HEADER = struct.Struct("<4sI")
_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class PoolingMethod:
    """Aggregation over frames: mean, sum, max, or subsample with n frames."""

    kind: str
    n_samples: int = 10

    def __post_init__(self):
        if self.kind not in POOLING_KINDS:
            raise ValueError(f"unknown pooling kind '{self.kind}', expected one of {POOLING_KINDS}")
        if self.kind == "subsample" and self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")

    @classmethod
    def from_string(cls, text: str) -> "PoolingMethod":
        """Parse "mean", "sum", "max" ("argmax"), "sub[sample][:n]"."""
        text = text.strip().lower()
        n = 10
        if ":" in text:
            text, n_text = text.split(":", 1)
            n = int(n_text)
        if text in ("sub", "subsample"):
            return cls("subsample", n)
        if text == "argmax":
            text = "max"
        return cls(text)

    def __str__(self):
        if self.kind == "subsample":
            return f"subsample:{self.n_samples}"
        return self.kind

    def output_dim(self, input_dim: int) -> int:
        return input_dim * self.n_samples if self.kind == "subsample" else input_dim


@dataclass
class Normalizer:
    """Per-dimension affine standardization fitted on the evaluated frames."""

    mean: np.ndarray
    scale: np.ndarray
    epsilon: float = 1e-8

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        if self.mean.shape != self.scale.shape or self.mean.ndim != 1:
            raise ShapeMismatchError(
                f"mean and scale must be 1-D vectors of equal length, got "
                f"{self.mean.shape} and {self.scale.shape}"
            )
        if np.any(self.scale < self.epsilon):
            raise ValueError("scale values must be floored at epsilon")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_normalizer(frames, scale_by_variance: bool = False, epsilon: float = 1e-8) -> Normalizer:
    """Fit per-dimension statistics over a stack of frame vectors.

    mean is the arithmetic mean and scale the population standard deviation
    (or, with ``scale_by_variance=True``, the population variance), both
    accumulated in float64 and floored at ``epsilon``.
    """
    x = np.atleast_2d(np.asarray(frames))
    if x.size == 0:
        raise ValueError("cannot fit a normalizer on zero frames")
    mean = x.mean(axis=0, dtype=np.float64)
    var = np.mean((x.astype(np.float64) - mean) ** 2, axis=0)
    scale = var if scale_by_variance else np.sqrt(var)
    return Normalizer(mean=mean, scale=np.maximum(scale, epsilon), epsilon=epsilon)


def apply_normalizer(norm: Normalizer, frames) -> np.ndarray:
    """Standardize a T x D frame matrix: (x - mean) / scale, in float64."""
    x = np.atleast_2d(np.asarray(frames))
    if x.shape[1] != norm.dim:
        raise ShapeMismatchError(f"frames have width {x.shape[1]}, normalizer expects {norm.dim}")
    return (x - norm.mean) / norm.scale


@dataclass
class PcaModel:
    """Orthonormal top-k projection of centered frame vectors."""

    center: np.ndarray
    basis: np.ndarray  # k x D, orthonormal rows, non-increasing eigenvalue order
    explained_variance: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        self.basis = np.asarray(self.basis, dtype=np.float64)
        self.explained_variance = np.asarray(self.explained_variance, dtype=np.float64)

    @property
    def input_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def output_dim(self) -> int:
        return self.basis.shape[0]


def fit_pca(frames, k: int) -> PcaModel:
    """Fit a k-dimensional PCA on frame vectors via covariance eigendecomposition.

    Basis rows are the top-k eigenvectors ordered by non-increasing
    eigenvalue (ties keep the eigensolver's original order), each flipped so
    its largest-magnitude coordinate is positive. Deterministic: identical
    input yields an identical model.
    """
    x = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    n, d = x.shape
    if n < 2:
        raise ValueError(f"PCA needs at least 2 frames, got {n}")
    if not (1 <= k <= d):
        raise ValueError(f"k must be in [1, {d}], got {k}")
    center = x.mean(axis=0)
    centered = x - center
    cov = (centered.T @ centered) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(-eigvals, kind="stable")[:k]
    basis = eigvecs[:, order].T.copy()
    explained = np.maximum(eigvals[order], 0.0)
    # Sign convention: largest-magnitude coordinate of each row is positive.
    for row in basis:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(center=center, basis=basis, explained_variance=explained)


def project_pca(model: PcaModel, frames) -> np.ndarray:
    """Project a T x D frame matrix to T x k: (x - center) @ basis.T."""
    x = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if x.shape[1] != model.input_dim:
        raise ShapeMismatchError(
            f"frames have width {x.shape[1]}, PCA expects {model.input_dim}"
        )
    return (x - model.center) @ model.basis.T


def subsample_indices(frames: int, n_samples: int) -> np.ndarray:
    """Row indices of n equally spaced frames: round(i*(T-1)/(n-1)),
    half away from zero; the middle frame for n = 1. Indices are
    non-decreasing and may repeat when T < n.
    """
    if frames < 1:
        raise ValueError("need at least one frame")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if n_samples == 1:
        return np.array([(2 * (frames - 1) + 2) // 4], dtype=np.intp)
    q = n_samples - 1
    i = np.arange(n_samples, dtype=np.int64)
    return ((2 * i * (frames - 1) + q) // (2 * q)).astype(np.intp)


def pool(frames, method: PoolingMethod) -> np.ndarray:
    """Aggregate a T x D frame matrix into one fixed-length float64 vector.

    mean and sum accumulate in float64 with identical summation order, so
    mean == sum / T holds exactly. Subsampling concatenates the selected
    rows in temporal order, yielding n_samples * D values.
    """
    x = np.atleast_2d(np.asarray(frames))
    if x.shape[0] < 1 or x.size == 0:
        raise ValueError("cannot pool an empty frame matrix")
    if method.kind in ("mean", "sum"):
        total = x.sum(axis=0, dtype=np.float64)
        return total / x.shape[0] if method.kind == "mean" else total
    if method.kind == "max":
        return x.max(axis=0).astype(np.float64)
    idx = subsample_indices(x.shape[0], method.n_samples)
    return x[idx].astype(np.float64).ravel()


@dataclass
class EmbeddingSet:
    """Aligned word-type labels and embedding vectors, plus producing config."""

    labels: list[str]
    vectors: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors))
        if len(self.labels) == 0 and self.vectors.size == 0:
            self.vectors = self.vectors.reshape(0, 0)
        if self.vectors.shape[0] != len(self.labels):
            raise ShapeMismatchError(
                f"{len(self.labels)} labels but {self.vectors.shape[0]} vectors"
            )
        if self.vectors.size and not np.all(np.isfinite(self.vectors)):
            bad = int(np.argwhere(~np.isfinite(self.vectors).all(axis=1))[0][0])
            raise DataError(f"non-finite embedding for item {bad} ('{self.labels[bad]}')")

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def embed_segments(
    archive: FeatureArchive,
    segments: list[WordSegment],
    method: PoolingMethod,
    norm: Normalizer | None = None,
    pca: PcaModel | None = None,
) -> EmbeddingSet:
    """Embed word segments: slice -> normalize -> PCA-project -> pool.

    Output order matches input order and labels are the (case-folded)
    segment words. Errors are re-raised with the offending segment named.
    """
    vectors = []
    labels = []
    for i, seg in enumerate(segments):
        try:
            x = slice_frames(archive, seg)
            if norm is not None:
                x = apply_normalizer(norm, x)
            if pca is not None:
                x = project_pca(pca, x)
            vectors.append(pool(x, method))
        except AwepoolError as e:
            e.args = (
                f"segment {i} ({seg.utterance_id} '{seg.word}' "
                f"[{seg.start_s:g}, {seg.end_s:g})): {e}",
            )
            raise
        labels.append(seg.word)
    if not vectors:
        return EmbeddingSet(labels=[], vectors=np.zeros((0, 0)))
    return EmbeddingSet(labels=labels, vectors=np.stack(vectors))


def write_embedding_set(embeddings: EmbeddingSet, path) -> None:
    """Write an AWEE file; vectors are stored as float32."""
    config_bytes = json.dumps(embeddings.meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_EMB_HEADER.pack(EMBEDDING_MAGIC, EMBEDDING_VERSION))
        f.write(_U32.pack(len(config_bytes)))
        f.write(config_bytes)
        f.write(_U32.pack(len(embeddings)))
        f.write(_U32.pack(embeddings.dim))
        for label, vec in zip(embeddings.labels, embeddings.vectors):
            label_bytes = label.encode("utf-8")
            f.write(_U32.pack(len(label_bytes)))
            f.write(label_bytes)
            f.write(np.ascontiguousarray(vec, dtype="<f4").tobytes())


def read_embedding_set(path) -> EmbeddingSet:
    """Read an AWEE file written by :func:`write_embedding_set`."""
    with open(path, "rb") as f:
        head = f.read(_EMB_HEADER.size)
        if len(head) < _EMB_HEADER.size:
            raise ArchiveFormatError("truncated header", offset=len(head))
        magic, version = _EMB_HEADER.unpack(head)
        if magic != EMBEDDING_MAGIC:
            raise ArchiveFormatError(f"bad magic {magic!r}, expected {EMBEDDING_MAGIC!r}", offset=0)
        if version != EMBEDDING_VERSION:
            raise ArchiveFormatError(f"unsupported version {version}", offset=4)
        pos = _EMB_HEADER.size

        def read_exact(n, what):
            nonlocal pos
            buf = f.read(n)
            if len(buf) < n:
                raise ArchiveFormatError(f"truncated {what}", offset=pos)
            pos += n
            return buf

        (config_len,) = _U32.unpack(read_exact(_U32.size, "config length"))
        meta = json.loads(read_exact(config_len, "config").decode("utf-8"))
        (count,) = _U32.unpack(read_exact(_U32.size, "item count"))
        (dim,) = _U32.unpack(read_exact(_U32.size, "dimension"))
        labels = []
        vectors = np.zeros((count, dim), dtype=np.float32)
        for i in range(count):
            (label_len,) = _U32.unpack(read_exact(_U32.size, f"label length {i}"))
            labels.append(read_exact(label_len, f"label {i}").decode("utf-8"))
            vectors[i] = np.frombuffer(read_exact(dim * 4, f"vector {i}"), dtype="<f4")
        if f.read(1):
            raise ArchiveFormatError("trailing bytes after last item", offset=pos)
    return EmbeddingSet(labels=labels, vectors=vectors, meta=meta)
