"""Bit packing, stream header and CBR frame multiplexing.

Bits are packed MSB first; multi-byte header fields are big-endian. A stream
is a 14-byte header followed by fixed-size frames. See ``docs/bitstream.md``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"ADRC"
VERSION = 1
FRAME_SECONDS = 0.02
_HEADER = struct.Struct(">4sBBIBBBB")
HEADER_BYTES = _HEADER.size

RATE_CODES = {32000: 0, 48000: 1}
TRANSPORT_CODES = {"passthrough": 0, "scalarq": 1}


class BitstreamError(ValueError):
    pass


class FormatError(BitstreamError):
    """The stream header is invalid."""


class FrameError(BitstreamError):
    """A frame is truncated or holds values that cannot be decoded."""

    def __init__(self, message: str, frame_index: int | None = None):
        super().__init__(message if frame_index is None else f"frame {frame_index}: {message}")
        self.frame_index = frame_index


class BitWriter:
    def __init__(self):
        self._chunks: list[np.ndarray] = []
        self.n_bits = 0

    def write(self, value: int, width: int):
        if width == 0:
            return
        value = int(value)
        if value < 0 or value >> width:
            raise ValueError(f"value {value} does not fit in {width} bits")
        bits = (value >> np.arange(width - 1, -1, -1)) & 1
        self._chunks.append(bits.astype(np.uint8))
        self.n_bits += width

    def write_array(self, values, width: int):
        """Write unsigned integers of a common width."""
        values = np.asarray(values, dtype=np.int64).reshape(-1)
        if width == 0 or values.size == 0:
            return
        if np.any(values < 0) or np.any(values >> width):
            raise ValueError(f"values do not fit in {width} bits")
        bits = (values[:, None] >> np.arange(width - 1, -1, -1)[None, :]) & 1
        self._chunks.append(bits.astype(np.uint8).reshape(-1))
        self.n_bits += values.size * width

    def write_bytes(self, data: bytes):
        self._chunks.append(np.unpackbits(np.frombuffer(data, dtype=np.uint8)))
        self.n_bits += 8 * len(data)

    def bits(self) -> np.ndarray:
        if not self._chunks:
            return np.zeros(0, dtype=np.uint8)
        return np.concatenate(self._chunks)

    def to_bytes(self, n_bytes: int | None = None) -> bytes:
        """Packed bits, zero padded to whole bytes (or to ``n_bytes``)."""
        bits = self.bits()
        if n_bytes is not None:
            if bits.size > 8 * n_bytes:
                raise BitstreamError(f"{bits.size} bits exceed {n_bytes} bytes")
            bits = np.concatenate([bits, np.zeros(8 * n_bytes - bits.size, dtype=np.uint8)])
        return np.packbits(bits).tobytes()


class BitReader:
    def __init__(self, data: bytes):
        self._bits = np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))
        self.pos = 0

    @property
    def remaining(self) -> int:
        return self._bits.size - self.pos

    def _take(self, n: int) -> np.ndarray:
        if n > self.remaining:
            raise FrameError(f"payload truncated: need {n} bits, {self.remaining} left")
        out = self._bits[self.pos:self.pos + n]
        self.pos += n
        return out

    def read(self, width: int) -> int:
        if width == 0:
            return 0
        v = 0
        for b in self._take(width):
            v = (v << 1) | int(b)
        return v

    def read_array(self, count: int, width: int) -> np.ndarray:
        if width == 0 or count == 0:
            return np.zeros(count, dtype=np.int64)
        bits = self._take(count * width).reshape(count, width).astype(np.int64)
        return bits @ (1 << np.arange(width - 1, -1, -1, dtype=np.int64))

    def read_bytes(self, n: int) -> bytes:
        return np.packbits(self._take(8 * n)).tobytes()


def frame_bits(bitrate: int) -> int:
    """Nominal CBR bits of one 20 ms frame."""
    bits = bitrate * FRAME_SECONDS
    if abs(bits - round(bits)) > 1e-9:
        raise FormatError(f"bitrate {bitrate} does not give a whole number of bits per frame")
    return int(round(bits))


def frame_bytes(bitrate: int) -> int:
    return -(-frame_bits(bitrate) // 8)


@dataclass(frozen=True)
class StreamHeader:
    sample_rate: int
    bitrate: int
    n_tc: int
    input_order: int
    n_bands: int
    transport: str = "scalarq"
    version: int = VERSION

    def pack(self) -> bytes:
        return _HEADER.pack(
            MAGIC, self.version, RATE_CODES[self.sample_rate], self.bitrate,
            self.n_tc, self.input_order, self.n_bands, TRANSPORT_CODES[self.transport],
        )

    @classmethod
    def unpack(cls, data: bytes) -> "StreamHeader":
        if len(data) < HEADER_BYTES:
            raise FormatError("stream shorter than header")
        magic, version, rate, bitrate, n_tc, order, n_bands, transport = _HEADER.unpack(data[:HEADER_BYTES])
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        rates = {v: k for k, v in RATE_CODES.items()}
        transports = {v: k for k, v in TRANSPORT_CODES.items()}
        if rate not in rates or transport not in transports or n_tc not in (1, 2, 4):
            raise FormatError("invalid header field")
        if n_bands not in (5, 6) or not 1 <= order <= 3:
            raise FormatError("invalid header field")
        frame_bits(bitrate)
        return cls(rates[rate], bitrate, n_tc, order, n_bands, transports[transport], version)

    def frame_size(self, samples_per_frame: int) -> int:
        """Bytes per frame: the CBR size, plus raw float32 samples in pass-through."""
        size = frame_bytes(self.bitrate)
        if self.transport == "passthrough":
            size += 4 * self.n_tc * samples_per_frame
        return size

    @property
    def samples_per_frame(self) -> int:
        return int(round(self.sample_rate * FRAME_SECONDS))


def mux(header: StreamHeader, frames) -> bytes:
    size = header.frame_size(header.samples_per_frame)
    out = [header.pack()]
    for i, f in enumerate(frames):
        if len(f) != size:
            raise FrameError(f"frame is {len(f)} bytes, expected {size}", i)
        out.append(bytes(f))
    return b"".join(out)


def demux(data: bytes, strict: bool = True) -> tuple[StreamHeader, list[bytes]]:
    """Split a stream into its header and frames.

    A trailing partial frame raises :class:`FrameError` when ``strict``;
    otherwise it is dropped.
    """
    header = StreamHeader.unpack(data)
    size = header.frame_size(header.samples_per_frame)
    body = data[HEADER_BYTES:]
    n_full, rest = divmod(len(body), size)
    if rest and strict:
        raise FrameError(f"truncated: {rest} of {size} bytes", n_full)
    return header, [body[i * size:(i + 1) * size] for i in range(n_full)]
