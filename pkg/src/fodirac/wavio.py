"""AmbiX WAV files: 32-bit float, ACN channel order, SN3D."""
from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .ambisonics import AmbisonicFrame, order_of_channels
from .filterbank import SUPPORTED_RATES

VALID_CHANNELS = (4, 9, 16)


class WavError(ValueError):
    pass


def read_ambix(path) -> AmbisonicFrame:
    """Read a float32 AmbiX file as ``(channels, samples)``."""
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as e:
        raise WavError(f"cannot read {path}: {e}") from None
    if data.dtype != np.float32:
        raise WavError(f"expected 32-bit float samples, got {data.dtype}")
    data = data.reshape(len(data), -1)
    if data.shape[1] not in VALID_CHANNELS:
        raise WavError(f"expected 4/9/16 channels, got {data.shape[1]}")
    if rate not in SUPPORTED_RATES:
        raise WavError(f"unsupported sample rate {rate}; use one of {SUPPORTED_RATES}")
    return AmbisonicFrame(data.T.astype(np.float64), int(rate))


def write_ambix(path, pcm, sample_rate: int):
    """Write ``(channels, samples)`` as float32 AmbiX."""
    pcm = np.atleast_2d(np.asarray(pcm))
    order_of_channels(pcm.shape[0])
    wavfile.write(path, int(sample_rate), np.ascontiguousarray(pcm.T.astype(np.float32)))
