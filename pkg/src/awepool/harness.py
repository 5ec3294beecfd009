"""Configuration-driven experiment runner and sweep harness.

One experiment = one feature archive (a model layer), one alignment file,
and one embedding recipe (pooling, normalization, optional PCA). Sweeps run
the Cartesian product of axis values (layer archive, pooling, pca_dim,
normalize) and never abort on a single failing combination.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import (
    AlignmentTable,
    FeatureArchive,
    WordSegment,
    filter_words,
    parse_alignments,
    read_feature_archive,
    slice_frames,
)
from .embed import (
    EmbeddingSet,
    Normalizer,
    PcaModel,
    PoolingMethod,
    apply_normalizer,
    embed_segments,
    fit_normalizer,
    fit_pca,
)
from .errors import AwepoolError
from .samediff import SameDiffResult, evaluate

SWEEPABLE_AXES = ("layer", "pooling", "pca_dim", "normalize")


@dataclass(frozen=True)
class ExperimentConfig:
    feature_archive_path: str = ""
    alignment_path: str = ""
    layer_tag: str = ""
    pooling: PoolingMethod = PoolingMethod("mean")
    normalize: bool = True
    scale_by_variance: bool = False
    pca_dim: int | None = None
    min_chars: int = 5
    min_duration_s: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.pca_dim is not None and self.pca_dim < 1:
            raise ValueError(f"pca_dim must be >= 1, got {self.pca_dim}")

    def to_dict(self) -> dict:
        return {
            "feature_archive_path": self.feature_archive_path,
            "alignment_path": self.alignment_path,
            "layer_tag": self.layer_tag,
            "pooling": str(self.pooling),
            "normalize": self.normalize,
            "scale_by_variance": self.scale_by_variance,
            "pca_dim": self.pca_dim,
            "min_chars": self.min_chars,
            "min_duration_s": self.min_duration_s,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {
            "feature_archive_path",
            "alignment_path",
            "layer_tag",
            "pooling",
            "normalize",
            "scale_by_variance",
            "pca_dim",
            "min_chars",
            "min_duration_s",
            "seed",
        }
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "pooling" in d and not isinstance(d["pooling"], PoolingMethod):
            d["pooling"] = PoolingMethod.from_string(d["pooling"])
        return cls(**d)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
        d.pop("axes", None)  # sweep configs carry axes alongside the base config
        return cls.from_dict(d)


@dataclass
class ResultRecord:
    config: ExperimentConfig
    result: SameDiffResult
    embedding_dim: int
    n_tokens: int
    n_types: int

    def to_dict(self, include_timing: bool = True) -> dict:
        return {
            "config": self.config.to_dict(),
            "embedding_dim": self.embedding_dim,
            "n_tokens": self.n_tokens,
            "n_types": self.n_types,
            "result": self.result.to_dict(include_timing=include_timing),
        }

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing=include_timing), sort_keys=True)


def build_embeddings(config: ExperimentConfig) -> EmbeddingSet:
    """Run the embedding half of the pipeline for one configuration.

    parse -> filter -> fit normalizer on the evaluated-word frames ->
    fit PCA on the same frames (after normalization) -> embed.
    """
    archive = read_feature_archive(config.feature_archive_path)
    table = parse_alignments(config.alignment_path)
    words = filter_words(table, min_chars=config.min_chars, min_duration_s=config.min_duration_s)
    if not words:
        raise AwepoolError(
            f"no segments pass the filter (min_chars={config.min_chars}, "
            f"min_duration_s={config.min_duration_s}) in {config.alignment_path}"
        )
    norm: Normalizer | None = None
    pca: PcaModel | None = None
    if config.normalize or config.pca_dim is not None:
        stats_frames = np.vstack([slice_frames(archive, seg) for seg in words])
        if config.normalize:
            norm = fit_normalizer(stats_frames, scale_by_variance=config.scale_by_variance)
        if config.pca_dim is not None:
            fit_input = apply_normalizer(norm, stats_frames) if norm else stats_frames
            pca = fit_pca(fit_input, config.pca_dim)
        del stats_frames
    embeddings = embed_segments(archive, words, config.pooling, norm=norm, pca=pca)
    embeddings.meta = config.to_dict()
    return embeddings


def run_experiment(config: ExperimentConfig, workers: int = 1, mode: str = "auto") -> ResultRecord:
    """Run one full experiment; identical configs produce identical records."""
    try:
        embeddings = build_embeddings(config)
        result = evaluate(embeddings, workers=workers, mode=mode)
    except AwepoolError as e:
        e.args = (f"[{_config_label(config)}] {e}",)
        raise
    return ResultRecord(
        config=config,
        result=result,
        embedding_dim=embeddings.dim,
        n_tokens=len(embeddings),
        n_types=len(set(embeddings.labels)),
    )


def _config_label(config: ExperimentConfig) -> str:
    layer = config.layer_tag or Path(config.feature_archive_path).stem
    norm = "norm" if config.normalize else "raw"
    pca = f" pca{config.pca_dim}" if config.pca_dim else ""
    return f"{layer}/{config.pooling}/{norm}{pca}"


@dataclass
class SweepEntry:
    config: ExperimentConfig
    record: ResultRecord | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.record is not None


def _layer_axis_value(value):
    """Accept {"tag","path"}, [tag, path], or a bare path string."""
    if isinstance(value, dict):
        return str(value["tag"]), str(value["path"])
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return str(value[0]), str(value[1])
    return Path(str(value)).stem, str(value)


def expand_axes(base: ExperimentConfig, axes: dict) -> list[ExperimentConfig]:
    """Cartesian product of axis values, in the axes' given order."""
    unknown = set(axes) - set(SWEEPABLE_AXES)
    if unknown:
        raise ValueError(f"unsweepable axes: {sorted(unknown)} (allowed: {SWEEPABLE_AXES})")
    names = list(axes)
    value_lists = []
    for name in names:
        values = axes[name]
        if not isinstance(values, (list, tuple)) or not values:
            raise ValueError(f"axis '{name}' must be a non-empty list")
        value_lists.append(list(values))
    configs = []
    for combo in itertools.product(*value_lists):
        cfg = base
        for name, value in zip(names, combo):
            if name == "layer":
                tag, path = _layer_axis_value(value)
                cfg = replace(cfg, layer_tag=tag, feature_archive_path=path)
            elif name == "pooling":
                method = value if isinstance(value, PoolingMethod) else PoolingMethod.from_string(value)
                cfg = replace(cfg, pooling=method)
            elif name == "pca_dim":
                cfg = replace(cfg, pca_dim=None if value in (None, "none") else int(value))
            elif name == "normalize":
                cfg = replace(cfg, normalize=bool(value))
        configs.append(cfg)
    return configs


def sweep(
    base: ExperimentConfig,
    axes: dict,
    workers: int = 1,
    mode: str = "auto",
) -> list[SweepEntry]:
    """Run every axis combination; failures are recorded, not raised.

    Output order is the deterministic Cartesian order regardless of worker
    scheduling.
    """
    configs = expand_axes(base, axes)

    def run_one(cfg: ExperimentConfig) -> SweepEntry:
        try:
            return SweepEntry(config=cfg, record=run_experiment(cfg, mode=mode))
        except (AwepoolError, ValueError, OSError) as e:
            return SweepEntry(config=cfg, error=str(e))

    if workers <= 1:
        return [run_one(cfg) for cfg in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_one, configs))


def select_best(entries: list[SweepEntry]) -> SweepEntry:
    """Highest-AP successful entry; ties broken by sweep order."""
    best = None
    for entry in entries:
        if not entry.ok:
            continue
        if best is None or entry.record.result.average_precision > best.record.result.average_precision:
            best = entry
    if best is None:
        raise AwepoolError("sweep produced no successful records to select from")
    return best


SUMMARY_FIELDS = [
    "layer_tag",
    "pooling",
    "normalize",
    "pca_dim",
    "embedding_dim",
    "n_tokens",
    "n_types",
    "average_precision",
    "auc_roc",
    "wall_time_s",
    "status",
    "error",
]


def write_sweep_outputs(entries: list[SweepEntry], out_prefix) -> tuple[Path, Path]:
    """Write records JSONL and a summary CSV next to each other."""
    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    jsonl_path = out_prefix.with_suffix(".jsonl")
    csv_path = out_prefix.with_suffix(".summary.csv")
    with open(jsonl_path, "w", encoding="utf-8") as f:
        for entry in entries:
            if entry.ok:
                f.write(json.dumps(entry.record.to_dict(), sort_keys=True) + "\n")
            else:
                f.write(
                    json.dumps(
                        {"config": entry.config.to_dict(), "error": entry.error}, sort_keys=True
                    )
                    + "\n"
                )
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        for entry in entries:
            row = {
                "layer_tag": entry.config.layer_tag or Path(entry.config.feature_archive_path).stem,
                "pooling": str(entry.config.pooling),
                "normalize": entry.config.normalize,
                "pca_dim": entry.config.pca_dim if entry.config.pca_dim is not None else "",
            }
            if entry.ok:
                rec = entry.record
                row.update(
                    embedding_dim=rec.embedding_dim,
                    n_tokens=rec.n_tokens,
                    n_types=rec.n_types,
                    average_precision=rec.result.average_precision,
                    auc_roc=rec.result.auc_roc,
                    wall_time_s=round(rec.result.wall_time_s, 3),
                    status="ok",
                    error="",
                )
            else:
                row.update(status="failed", error=entry.error)
            writer.writerow(row)
    return jsonl_path, csv_path


def generate_synthetic(
    n_types: int,
    tokens_per_type: int,
    dim: int,
    frames_range: tuple[int, int] = (25, 50),
    separation: float = 1.0,
    seed: int = 0,
    frame_rate_hz: float = 50.0,
    min_angle_deg: float = 30.0,
) -> tuple[FeatureArchive, AlignmentTable]:
    """Generate a synthetic word corpus with controllable type separation.

    Each word type w0001, w0002, ... gets a unit-norm latent mean (pairwise
    angle >= min_angle_deg, by rejection sampling). Each token is one
    utterance whose frames are latent_mean * separation plus unit Gaussian
    noise, with a random length drawn from frames_range (inclusive). Every
    token spans its whole utterance and passes the default evaluated-word
    filter. Fully determined by the seed.
    """
    if n_types < 2:
        raise ValueError(f"n_types must be >= 2, got {n_types}")
    if tokens_per_type < 2:
        raise ValueError(f"tokens_per_type must be >= 2, got {tokens_per_type}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if separation < 0:
        raise ValueError(f"separation must be >= 0, got {separation}")
    lo, hi = int(frames_range[0]), int(frames_range[1])
    if not (1 <= lo <= hi):
        raise ValueError(f"invalid frames_range {frames_range}")
    if lo / frame_rate_hz < 0.5:
        raise ValueError(
            f"frames_range minimum {lo} is shorter than the default 0.5 s filter "
            f"at {frame_rate_hz} Hz (need >= {math.ceil(0.5 * frame_rate_hz)})"
        )
    rng = np.random.default_rng(seed)
    max_cos = math.cos(math.radians(min_angle_deg))
    means = []
    attempts = 0
    while len(means) < n_types:
        attempts += 1
        if attempts > 10_000 * n_types:
            raise ValueError(
                f"could not place {n_types} type means with pairwise angle "
                f">= {min_angle_deg} deg in {dim} dimensions"
            )
        v = rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        if all(float(v @ m) <= max_cos for m in means):
            means.append(v)

    entries: dict[str, np.ndarray] = {}
    segments: list[WordSegment] = []
    counter = 0
    for t, mean_vec in enumerate(means):
        word = f"w{t + 1:04d}"
        target = separation * mean_vec
        for _ in range(tokens_per_type):
            counter += 1
            uid = f"u{counter:05d}"
            frames = int(rng.integers(lo, hi + 1))
            entries[uid] = (target + rng.standard_normal((frames, dim))).astype(np.float32)
            segments.append(WordSegment(uid, word, 0.0, frames / frame_rate_hz))
    archive = FeatureArchive(entries, frame_rate_hz=frame_rate_hz, dim=dim)
    return archive, AlignmentTable(segments)


def export_projection_2d(embeddings: EmbeddingSet, out_path) -> None:
    """Project embeddings to 2-D with PCA and write CSV rows label,x,y.

    Deterministic; degenerate (all-identical) embeddings land at the origin
    with a warning.
    """
    n = len(embeddings)
    if n < 3:
        raise ValueError(f"need at least 3 items to project, got {n}")
    x = np.asarray(embeddings.vectors, dtype=np.float64)
    if x.shape[1] >= 2:
        model = fit_pca(x, 2)
        coords = (x - model.center) @ model.basis.T
        if model.explained_variance[0] <= 1e-24:
            warnings.warn("degenerate embeddings: all points project to the origin")
    else:
        coords = np.zeros((n, 2))
        coords[:, 0] = x[:, 0] - x[:, 0].mean()
    with open(out_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["label", "x", "y"])
        for label, (px, py) in zip(embeddings.labels, coords):
            writer.writerow([label, repr(float(px)), repr(float(py))])
