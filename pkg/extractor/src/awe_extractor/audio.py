"""WAV loading: mono mixdown, optional crop, resampling to the model rate."""

from __future__ import annotations

import math

import numpy as np
import scipy.io.wavfile
import scipy.signal

TARGET_RATE = 16_000

_INT_SCALES = {np.dtype(np.int16): 2**15, np.dtype(np.int32): 2**31}


def load_waveform(
    path,
    start_s: float | None = None,
    end_s: float | None = None,
    target_rate: int = TARGET_RATE,
) -> np.ndarray:
    """Load a WAV file as float32 mono at ``target_rate`` Hz.

    Cropping (in seconds) happens at the native rate before resampling.
    Raises ValueError for files scipy cannot decode or empty crops.
    """
    try:
        rate, data = scipy.io.wavfile.read(path)
    except Exception as e:
        raise ValueError(f"cannot decode '{path}': {e}") from e
    if data.size == 0:
        raise ValueError(f"'{path}' contains no samples")
    if data.dtype in _INT_SCALES:
        wav = data.astype(np.float32) / _INT_SCALES[data.dtype]
    elif data.dtype == np.uint8:
        wav = (data.astype(np.float32) - 128.0) / 128.0
    else:
        wav = data.astype(np.float32)
    if wav.ndim == 2:
        wav = wav.mean(axis=1)
    if start_s is not None or end_s is not None:
        a = 0 if start_s is None else max(0, math.floor(start_s * rate))
        b = wav.shape[0] if end_s is None else min(wav.shape[0], math.ceil(end_s * rate))
        wav = wav[a:b]
        if wav.size == 0:
            raise ValueError(f"crop [{start_s}, {end_s}) of '{path}' is empty")
    if rate != target_rate:
        g = math.gcd(int(rate), int(target_rate))
        wav = scipy.signal.resample_poly(wav, target_rate // g, rate // g).astype(np.float32)
    return np.ascontiguousarray(wav, dtype=np.float32)
