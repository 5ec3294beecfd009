"""Writer for the feature-archive container consumed by awepool.

Implemented against the published format so this package has no import
dependency on the evaluation toolkit; its reader is only used in tests to
validate our output.

Layout (little-endian): magic "AWEF", version u32=1, frame_rate_hz f64,
dim u32, entry count u32; per entry: id length u32, UTF-8 id, frame count
u32, then T x dim float32 row-major.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"AWEF"
VERSION = 1

_HEADER = struct.Struct("<4sIdII")
_U32 = struct.Struct("<I")


def write_archive(
    entries: dict[str, np.ndarray],
    frame_rate_hz: float,
    dim: int,
    path,
    manifest: bool = True,
) -> None:
    """Write entries in the given (manifest) order.

    Every matrix must be T x dim float32 with T >= 1 and finite values.
    """
    for uid, mat in entries.items():
        if mat.ndim != 2 or mat.shape[1] != dim:
            raise ValueError(f"entry '{uid}': expected shape (T, {dim}), got {mat.shape}")
        if mat.shape[0] < 1:
            raise ValueError(f"entry '{uid}': no frames")
        if not np.all(np.isfinite(mat)):
            raise ValueError(f"entry '{uid}': non-finite values")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, float(frame_rate_hz), dim, len(entries)))
        for uid, mat in entries.items():
            id_bytes = uid.encode("utf-8")
            f.write(_U32.pack(len(id_bytes)))
            f.write(id_bytes)
            f.write(_U32.pack(mat.shape[0]))
            f.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())
    if manifest:
        with open(f"{path}.manifest.jsonl", "w", encoding="utf-8") as f:
            for uid, mat in entries.items():
                f.write(
                    json.dumps(
                        {
                            "id": uid,
                            "frames": int(mat.shape[0]),
                            "duration_s": mat.shape[0] / frame_rate_hz,
                        }
                    )
                    + "\n"
                )
