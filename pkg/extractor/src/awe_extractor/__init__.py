"""Dump per-layer speech-model representations into awepool feature archives."""

from .archive import write_archive
from .audio import load_waveform
from .extract import (
    ExtractionResult,
    conv_output_length,
    extract_features,
    frame_rate_hz,
    load_model,
)
from .manifest import ExtractionManifest, ManifestRow, parse_manifest_rows

__version__ = "0.1.0"
