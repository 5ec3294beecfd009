"""Dump per-layer transformer hidden states into feature archives.

Layer indexing is 1-based over transformer layers: requesting layer k stores
``hidden_states[k]`` from the model output, the output of the k-th
transformer layer (``hidden_states[0]`` is the pre-transformer feature
projection and is not addressable here). The checkpoint's actual layer count
is recorded in each archive's ``.meta.json`` sidecar.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .archive import write_archive
from .audio import TARGET_RATE, load_waveform
from .manifest import ExtractionManifest

logger = logging.getLogger(__name__)


@dataclass
class ExtractionResult:
    archive_paths: list[Path]
    skipped: list[tuple[str, str]] = field(default_factory=list)


def load_model(model_ref: str, device: str = "cpu"):
    """Load a pretrained wav2vec2/HuBERT-style model by hub id or local path."""
    from transformers import AutoModel

    model = AutoModel.from_pretrained(model_ref)
    model.eval()
    return model.to(device)


def conv_output_length(config, n_samples: int) -> int:
    """Frame count produced by the model's CNN frontend for n input samples."""
    length = n_samples
    for kernel, stride in zip(config.conv_kernel, config.conv_stride):
        length = (length - kernel) // stride + 1
    return length


def frame_rate_hz(config, sample_rate: int = TARGET_RATE) -> float:
    return sample_rate / math.prod(config.conv_stride)


def model_tag(model_id: str) -> str:
    if Path(model_id).exists():
        model_id = Path(model_id).name  # local checkpoint: use the directory name
    return re.sub(r"[^A-Za-z0-9._-]+", "_", model_id) or "model"


def _normalize_input(wav: np.ndarray) -> np.ndarray:
    # zero-mean unit-variance, as the Large checkpoints expect
    return (wav - wav.mean()) / np.sqrt(wav.var() + 1e-7)


def _batches(items, size):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def extract_features(
    manifest: ExtractionManifest,
    out_dir,
    model=None,
    batch_size: int = 1,
    device: str = "cpu",
) -> ExtractionResult:
    """Encode every manifest row and write one archive per requested layer.

    Archives are named ``<model_tag>_layer<k>.awef`` with entries in manifest
    order. Undecodable rows are logged and skipped (reported in the result);
    an out-of-range layer index is a fatal error.
    """
    if model is None:
        model = load_model(manifest.model_id, device=device)
    else:
        model = model.to(device)
        model.eval()
    config = model.config
    n_layers = config.num_hidden_layers
    if not manifest.layer_indices:
        raise ValueError("no layer indices requested")
    for k in manifest.layer_indices:
        if not (1 <= k <= n_layers):
            raise ValueError(
                f"layer {k} out of range: checkpoint has {n_layers} transformer layers"
            )
    rate = frame_rate_hz(config)
    if manifest.target_frame_rate_hz is not None and not math.isclose(
        rate, manifest.target_frame_rate_hz, rel_tol=1e-6
    ):
        raise ValueError(
            f"model produces {rate} frames/s but the manifest requires "
            f"{manifest.target_frame_rate_hz}"
        )
    normalize = getattr(config, "feat_extract_norm", "") == "layer"

    decoded = []
    skipped: list[tuple[str, str]] = []
    for row in manifest.rows:
        try:
            wav = load_waveform(row.audio_path, row.start_s, row.end_s)
            if conv_output_length(config, wav.shape[0]) < 1:
                raise ValueError(f"audio too short ({wav.shape[0]} samples)")
        except ValueError as e:
            logger.error("skipping %s: %s", row.utterance_id, e)
            skipped.append((row.utterance_id, str(e)))
            continue
        if normalize:
            wav = _normalize_input(wav)
        decoded.append((row.utterance_id, wav))

    per_layer: dict[int, dict[str, np.ndarray]] = {k: {} for k in manifest.layer_indices}
    with torch.no_grad():
        for batch in _batches(decoded, max(1, batch_size)):
            lengths = [wav.shape[0] for _, wav in batch]
            max_len = max(lengths)
            inputs = torch.zeros((len(batch), max_len), dtype=torch.float32)
            mask = torch.zeros((len(batch), max_len), dtype=torch.long)
            for b, (_, wav) in enumerate(batch):
                inputs[b, : wav.shape[0]] = torch.from_numpy(wav)
                mask[b, : wav.shape[0]] = 1
            outputs = model(
                inputs.to(device),
                attention_mask=mask.to(device),
                output_hidden_states=True,
            )
            frame_counts = [conv_output_length(config, n) for n in lengths]
            for k in manifest.layer_indices:
                states = outputs.hidden_states[k].cpu().numpy()
                for b, (uid, _) in enumerate(batch):
                    per_layer[k][uid] = np.ascontiguousarray(
                        states[b, : frame_counts[b]], dtype=np.float32
                    )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = model_tag(manifest.model_id or getattr(config, "name_or_path", "") or "model")
    archive_paths = []
    for k in manifest.layer_indices:
        path = out_dir / f"{tag}_layer{k}.awef"
        write_archive(per_layer[k], rate, config.hidden_size, path, manifest=True)
        meta = {
            "model_id": manifest.model_id,
            "layer": k,
            "num_transformer_layers": n_layers,
            "hidden_size": config.hidden_size,
            "frame_rate_hz": rate,
            "n_utterances": len(per_layer[k]),
            "n_skipped": len(skipped),
        }
        Path(f"{path}.meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
        archive_paths.append(path)
    return ExtractionResult(archive_paths=archive_paths, skipped=skipped)
