"""Complex modulated low-delay filterbank.

A modulated complex lapped transform: each slot windows the last ``2 M``
samples with a sine window and projects onto ``M`` complex exponentials at
the band centres ``(k + 1/2) fs / (2 M)``. The real part is an orthonormal
MDCT and the (negated) imaginary part an MDST, so the transform is
energy-preserving and perfectly reconstructing, with a delay of exactly
``M`` samples (one slot).

At 48 kHz ``M = 60``: 400 Hz bins and 1.25 ms slots; 16 slots per 20 ms frame.
"""
from __future__ import annotations

import numpy as np

SUPPORTED_RATES = (32000, 48000)
BIN_WIDTH_HZ = 400.0
SLOT_SECONDS = 0.00125
SLOTS_PER_FRAME = 16


class ConfigurationError(ValueError):
    pass


def check_rate(sample_rate: int) -> int:
    if int(sample_rate) not in SUPPORTED_RATES:
        raise ConfigurationError(f"unsupported sample rate {sample_rate}; use one of {SUPPORTED_RATES}")
    return int(sample_rate)


def n_bins(sample_rate: int) -> int:
    return check_rate(sample_rate) // 800


def frame_length(sample_rate: int) -> int:
    return n_bins(sample_rate) * SLOTS_PER_FRAME


def bin_centers(sample_rate: int) -> np.ndarray:
    m = n_bins(sample_rate)
    return (np.arange(m) + 0.5) * sample_rate / (2 * m)


def _kernel(m: int) -> tuple[np.ndarray, np.ndarray]:
    n = np.arange(2 * m)
    window = np.sin(np.pi * (n + 0.5) / (2 * m))
    phase = np.pi / m * np.outer(n + 0.5 + m / 2, np.arange(m) + 0.5)
    analysis = (window[:, None] * np.exp(-1j * phase)) / np.sqrt(m)
    synthesis = (window[None, :] * np.exp(1j * phase.T)) / np.sqrt(m)
    return analysis, synthesis


class Filterbank:
    """Streaming analysis/synthesis for a fixed channel count.

    ``analyze`` and ``synthesize`` keep separate overlap state, so one
    instance can serve as either an analysis or a synthesis bank (or both, on
    the same stream).
    """

    def __init__(self, n_channels: int, sample_rate: int = 48000):
        self.sample_rate = check_rate(sample_rate)
        self.n_channels = int(n_channels)
        self.n_bins = n_bins(sample_rate)
        self.frame_length = self.n_bins * SLOTS_PER_FRAME
        self._analysis, self._synthesis = _kernel(self.n_bins)
        self.reset()

    @property
    def latency(self) -> int:
        """Analysis + synthesis delay in samples."""
        return self.n_bins

    def reset(self):
        self._in_tail = np.zeros((self.n_channels, self.n_bins))
        self._out_tail = np.zeros((self.n_channels, self.n_bins))

    def analyze(self, pcm) -> np.ndarray:
        """Transform ``(channels, S*M)`` samples into ``(channels, S, M)`` bins."""
        pcm = np.asarray(pcm, dtype=float)
        m = self.n_bins
        if pcm.ndim != 2 or pcm.shape[0] != self.n_channels or pcm.shape[1] % m:
            raise ConfigurationError(
                f"expected ({self.n_channels}, multiple of {m}) samples, got {pcm.shape}"
            )
        n_slots = pcm.shape[1] // m
        buf = np.concatenate([self._in_tail, pcm], axis=1)
        self._in_tail = buf[:, -m:].copy()
        idx = np.arange(n_slots)[:, None] * m + np.arange(2 * m)[None, :]
        blocks = buf[:, idx]  # (C, S, 2M)
        return blocks @ self._analysis

    def synthesize(self, tf) -> np.ndarray:
        """Inverse of :meth:`analyze`; output lags the analysed input by ``latency``."""
        tf = np.asarray(tf)
        m = self.n_bins
        if tf.ndim != 3 or tf.shape[0] != self.n_channels or tf.shape[2] != m:
            raise ConfigurationError(
                f"expected ({self.n_channels}, slots, {m}) coefficients, got {tf.shape}"
            )
        n_slots = tf.shape[1]
        blocks = (tf @ self._synthesis).real  # (C, S, 2M)
        out = np.zeros((self.n_channels, (n_slots + 1) * m))
        out[:, :m] = self._out_tail
        for s in range(n_slots):
            out[:, s * m:(s + 2) * m] += blocks[:, s]
        self._out_tail = out[:, -m:].copy()
        return out[:, :-m]


def analyze(pcm, sample_rate: int = 48000) -> np.ndarray:
    """One-shot analysis of a whole signal from a zero initial state."""
    pcm = np.atleast_2d(pcm)
    return Filterbank(pcm.shape[0], sample_rate).analyze(pcm)


def synthesize(tf, sample_rate: int = 48000) -> np.ndarray:
    """One-shot synthesis from a zero initial state."""
    tf = np.asarray(tf)
    if tf.ndim == 2:
        tf = tf[None]
    return Filterbank(tf.shape[0], sample_rate).synthesize(tf)
