"""Stand-in core coder for the transport channels.

``passthrough`` carries float32 samples verbatim and ignores the bit budget.
``scalarq`` fits the budget with block-companded uniform scalar quantisation:
per channel, eight blocks each with a 7-bit gain, followed by midtread
mantissas. When the budget cannot afford 4 bits per sample at full rate the
channels are decimated first (frame-local polyphase resampling).

Both modes are frame-local.
"""
from __future__ import annotations

import numpy as np
from scipy.signal import resample_poly

from .bitstream import BitReader, BitWriter, BitstreamError, FrameError

MODES = ("passthrough", "scalarq")
DECIMATION = (1, 2, 4, 5, 8, 10, 16, 20)
DECIMATION_BITS = 3
WIDTH_BITS = 4
GAIN_BITS = 7
GAIN_OFFSET = 96
BLOCKS = 8
MIN_WIDTH = 2
MAX_WIDTH = 15
TARGET_WIDTH = 4


class BudgetError(BitstreamError):
    pass


def header_bits(n_tc: int) -> int:
    return DECIMATION_BITS + WIDTH_BITS + n_tc * BLOCKS * GAIN_BITS


def choose_resolution(n_tc: int, n_samples: int, budget_bits: int) -> tuple[int, int]:
    """Decimation factor and mantissa width for a budget."""
    avail = budget_bits - header_bits(n_tc)
    if avail < 0:
        raise BudgetError(f"budget of {budget_bits} bits below the {header_bits(n_tc)}-bit header")
    fallback = None
    for r in DECIMATION:
        if n_samples % r:
            continue
        width = min(MAX_WIDTH, avail // (n_tc * (n_samples // r)))
        if width >= TARGET_WIDTH:
            return r, int(width)
        if width >= MIN_WIDTH and fallback is None:
            fallback = (r, int(width))
    if fallback is None:
        # the largest usable factor still leaves too little for mantissas
        raise BudgetError(f"budget of {budget_bits} bits too small for {n_tc} channels")
    return fallback


def _gain_code(peak: float) -> int:
    if peak <= 0.0 or not np.isfinite(peak):
        return 0
    code = int(np.ceil(4.0 * np.log2(peak))) + GAIN_OFFSET
    return int(np.clip(code, 1, 2 ** GAIN_BITS - 1))


def _gain(code: int) -> float:
    return 2.0 ** ((code - GAIN_OFFSET) / 4.0)


def encode_tc(tc, budget_bits: int | None, mode: str, writer: BitWriter | None = None) -> BitWriter:
    """Append the transport payload for ``tc`` (channels, samples) to ``writer``."""
    tc = np.atleast_2d(np.asarray(tc, dtype=float))
    writer = BitWriter() if writer is None else writer
    if mode == "passthrough":
        writer.write_bytes(tc.astype(">f4").tobytes())
        return writer
    if mode != "scalarq":
        raise ValueError(f"unknown transport mode {mode!r}")
    if budget_bits is None or budget_bits <= 0:
        raise BudgetError("scalarq needs a positive bit budget")
    n_tc, n = tc.shape
    r, width = choose_resolution(n_tc, n, budget_bits)
    start = writer.n_bits
    writer.write(DECIMATION.index(r), DECIMATION_BITS)
    writer.write(width, WIDTH_BITS)
    q_max = 2 ** (width - 1) - 1
    coded = []
    for ch in tc:
        x = resample_poly(ch, 1, r, padtype="line") if r > 1 else ch
        for block in np.array_split(x, BLOCKS):
            code = _gain_code(float(np.max(np.abs(block))) if block.size else 0.0)
            writer.write(code, GAIN_BITS)
            coded.append((code, block))
    for code, block in coded:
        if code == 0:
            continue
        q = np.clip(np.round(block / _gain(code) * q_max), -q_max, q_max).astype(np.int64)
        writer.write_array(q + q_max, width)
    used = writer.n_bits - start
    if used > budget_bits:
        raise BudgetError(f"scalarq payload {used} bits exceeds budget {budget_bits}")
    return writer


def decode_tc(reader: BitReader, n_tc: int, n_samples: int, mode: str) -> np.ndarray:
    """Read a transport payload written by :func:`encode_tc`."""
    if mode == "passthrough":
        raw = reader.read_bytes(4 * n_tc * n_samples)
        out = np.frombuffer(raw, dtype=">f4").astype(np.float64).reshape(n_tc, n_samples)
        if not np.all(np.isfinite(out)):
            raise FrameError("non-finite pass-through samples")
        return out
    if mode != "scalarq":
        raise ValueError(f"unknown transport mode {mode!r}")
    r_code = reader.read(DECIMATION_BITS)
    width = reader.read(WIDTH_BITS)
    r = DECIMATION[r_code]
    if width == 0:
        # reserved: silent transport frame, nothing further is coded
        return np.zeros((n_tc, n_samples))
    if width < MIN_WIDTH or n_samples % r:
        raise FrameError(f"invalid scalarq header (decimation {r}, width {width})")
    n_dec = n_samples // r
    sizes = [len(b) for b in np.array_split(np.zeros(n_dec), BLOCKS)]
    codes = reader.read_array(n_tc * BLOCKS, GAIN_BITS).reshape(n_tc, BLOCKS)
    q_max = 2 ** (width - 1) - 1
    out = np.zeros((n_tc, n_samples))
    for c in range(n_tc):
        parts = []
        for code, size in zip(codes[c], sizes):
            if code == 0:
                parts.append(np.zeros(size))
                continue
            q = reader.read_array(size, width) - q_max
            if np.any(np.abs(q) > q_max):
                raise FrameError("scalarq mantissa out of range")
            parts.append(q * (_gain(int(code)) / q_max))
        x = np.concatenate(parts)
        out[c] = resample_poly(x, r, 1, padtype="line")[:n_samples] if r > 1 else x
    return out


def encode_tc_bytes(tc, budget_bits, mode: str) -> bytes:
    return encode_tc(tc, budget_bits, mode).to_bytes()


def decode_tc_bytes(payload: bytes, n_tc: int, n_samples: int, mode: str) -> np.ndarray:
    return decode_tc(BitReader(payload), n_tc, n_samples, mode)
