"""DirAC parameter coding.

Temporal downsampling (one diffuseness per 20 ms frame, one DOA per 5 ms
subframe), the 3-bit diffuseness quantiser, the diffuseness-dependent DOA
resolution, the spherical grids and the budget-capped frame payload.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .ambisonics import Direction
from .analysis import SlotParams, doa_vectors
from .bitstream import BitReader, BitWriter, FrameError

DIFFUSENESS_LEVELS = np.array([0.0, 0.04, 0.10, 0.19, 0.32, 0.47, 0.67, 0.95])
DIFFUSENESS_BITS = 3
DOA_BITS = (11, 11, 10, 8, 7, 5, 3, 2)
MIN_DOA_BITS = 2
MAX_DOA_BITS = 11
SUBFRAMES = 4
SLOTS_PER_SUBFRAME = 4


def quantize_diffuseness(psi) -> np.ndarray | int:
    """Nearest codebook level; ties go to the lower index."""
    psi = np.clip(np.asarray(psi, dtype=float), 0.0, 1.0)
    idx = np.argmin(np.abs(psi[..., None] - DIFFUSENESS_LEVELS), axis=-1)
    return int(idx) if idx.ndim == 0 else idx


def dequantize_diffuseness(index):
    index = np.asarray(index)
    if np.any((index < 0) | (index >= len(DIFFUSENESS_LEVELS))):
        raise ValueError(f"diffuseness index out of range: {index}")
    out = DIFFUSENESS_LEVELS[index]
    return float(out) if out.ndim == 0 else out


def doa_bits(diffuseness_index: int) -> int:
    return DOA_BITS[int(diffuseness_index)]


class SphericalGrid:
    """Near-uniform point set on the sphere addressed by a ``bits``-wide index.

    Rings sit at elevations ``j * d`` for ``j = -J..J`` with ``d = pi / n_rings``
    and ``n_rings = 2J + 1``; each ring carries ``round(2 pi cos(el) / d)``
    points starting at azimuth 0, and each pole one point. Indices run from
    the south pole through the rings to the north pole.
    """

    def __init__(self, bits: int):
        if not MIN_DOA_BITS <= bits <= MAX_DOA_BITS:
            raise ValueError(f"bit width {bits} outside {MIN_DOA_BITS}..{MAX_DOA_BITS}")
        self.bits = bits
        n_rings = 1
        while _grid_size(n_rings + 2) <= 2 ** bits:
            n_rings += 2
        self.n_rings = n_rings
        self.step = np.pi / n_rings
        j = np.arange(n_rings) - n_rings // 2
        ring_el = j * self.step
        ring_n = _ring_counts(n_rings)
        self.elevations = np.concatenate([[-np.pi / 2], ring_el, [np.pi / 2]])
        self.counts = np.concatenate([[1], ring_n, [1]]).astype(int)
        self.offsets = np.concatenate([[0], np.cumsum(self.counts)[:-1]])
        self.size = int(self.counts.sum())
        az, el = [], []
        for e, n in zip(self.elevations, self.counts):
            a = 2 * np.pi * np.arange(n) / n
            az.append((a + np.pi) % (2 * np.pi) - np.pi)
            el.append(np.full(n, e))
        self.azimuths = np.concatenate(az)
        self.point_elevations = np.concatenate(el)
        self.points = np.stack([
            np.cos(self.point_elevations) * np.cos(self.azimuths),
            np.cos(self.point_elevations) * np.sin(self.azimuths),
            np.sin(self.point_elevations),
        ], axis=-1)
        self.points[0] = (0.0, 0.0, -1.0)
        self.points[-1] = (0.0, 0.0, 1.0)
        self.azimuths[[0, -1]] = 0.0

    @property
    def nominal_step(self) -> float:
        """Ring spacing in radians."""
        return self.step

    def dequantize(self, index: int) -> Direction:
        if not 0 <= int(index) < self.size:
            raise FrameError(f"DOA index {index} outside grid of {self.size} points")
        return Direction(self.azimuths[index], self.point_elevations[index])

    def quantize_vector(self, v) -> int:
        """Grid index closest in central angle to the unit vector ``v``."""
        return int(self.quantize_vectors(np.asarray(v, dtype=float)[None])[0])

    def quantize_vectors(self, v) -> np.ndarray:
        """Vectorised :meth:`quantize_vector` for ``(N, 3)`` vectors.

        Only the two azimuth neighbours on the four rings around the target
        elevation (and the poles) are candidates; ties go to the lower index.
        """
        v = np.asarray(v, dtype=float).reshape(-1, 3)
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
        el = np.arcsin(np.clip(v[:, 2], -1.0, 1.0))
        az = np.arctan2(v[:, 1], v[:, 0])
        # position along the ring array (pole rows are 0 and n_rings+1)
        r = el / self.step + self.n_rings // 2 + 1
        last = len(self.counts) - 1
        rings = np.clip(np.floor(r)[:, None].astype(int) - 1 + np.arange(4), 0, last)  # (N, 4)
        n = self.counts[rings]
        pos = (az / (2 * np.pi))[:, None] * n
        lo = np.floor(pos).astype(int) % n
        hi = np.ceil(pos).astype(int) % n
        cands = np.concatenate([
            self.offsets[rings] + lo, self.offsets[rings] + hi,
            np.zeros((len(v), 1), int), np.full((len(v), 1), self.size - 1),
        ], axis=1)
        cands = np.sort(cands, axis=1)
        dots = np.einsum("nkc,nc->nk", self.points[cands], v)
        return cands[np.arange(len(v)), np.argmax(dots, axis=1)]

    def quantize(self, direction: Direction) -> int:
        return self.quantize_vector(direction.to_vector())


def _ring_counts(n_rings: int) -> np.ndarray:
    step = np.pi / n_rings
    el = (np.arange(n_rings) - n_rings // 2) * step
    return np.maximum(1, np.round(2 * np.pi * np.cos(el) / step)).astype(int)


def _grid_size(n_rings: int) -> int:
    return int(_ring_counts(n_rings).sum()) + 2


@lru_cache(maxsize=None)
def spherical_grid(bits: int) -> SphericalGrid:
    return SphericalGrid(bits)


def spherical_quantize(direction: Direction, bits: int) -> int:
    return spherical_grid(bits).quantize(direction)


def spherical_dequantize(index: int, bits: int) -> Direction:
    return spherical_grid(bits).dequantize(index)


@dataclass
class FrameParams:
    """Per-band parameters of one 20 ms frame before quantisation."""

    diffuseness: np.ndarray  # (B,)
    directions: np.ndarray   # (4, B, 3) unit vectors, one row per 5 ms subframe


def downsample_params(slots: SlotParams, previous=None) -> FrameParams:
    """Reduce 16 slots to one diffuseness and four DOAs per band.

    The frame diffuseness is the energy-weighted mean of the slot values. A
    subframe DOA is the direction of the summed intensity of its four slots;
    when that sum is degenerate the last slot's held DOA is used.
    """
    n_slots = slots.energy.shape[0]
    if n_slots != SUBFRAMES * SLOTS_PER_SUBFRAME:
        raise ValueError(f"expected {SUBFRAMES * SLOTS_PER_SUBFRAME} slots, got {n_slots}")
    e_tot = slots.energy.sum(axis=0)
    weighted = (slots.energy * slots.diffuseness).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = np.where(e_tot > 0, weighted / e_tot, slots.diffuseness.mean(axis=0))
    shape = (SUBFRAMES, SLOTS_PER_SUBFRAME) + slots.intensity.shape[1:]
    i_sub = slots.intensity.reshape(shape).sum(axis=1)
    e_sub = slots.energy.reshape(shape[:-1]).sum(axis=1)
    held = slots.direction.reshape(shape)[:, -1]
    dirs = np.stack([doa_vectors(i_sub[s], e_sub[s], held[s]) for s in range(SUBFRAMES)])
    return FrameParams(np.clip(psi, 0.0, 1.0), dirs)


@dataclass
class QuantizedParamFrame:
    """Indices of one frame for the coded bands."""

    diffuseness_index: np.ndarray  # (B,)
    doa_index: np.ndarray          # (4, B)
    doa_width: np.ndarray          # (B,) bit width used (after budget reduction)
    bands: tuple[int, ...] = field(default=())  # absolute band numbers coded

    @property
    def n_bits(self) -> int:
        return payload_bits(self.doa_width)

    def dequantize(self) -> tuple[np.ndarray, np.ndarray]:
        """Frame diffuseness ``(B,)`` and subframe DOA vectors ``(4, B, 3)``."""
        psi = np.asarray(dequantize_diffuseness(self.diffuseness_index), dtype=float).reshape(-1)
        vecs = np.empty(self.doa_index.shape + (3,))
        for b, w in enumerate(self.doa_width):
            grid = spherical_grid(int(w))
            for s in range(self.doa_index.shape[0]):
                vecs[s, b] = grid.dequantize(int(self.doa_index[s, b])).to_vector()
        return psi, vecs


def payload_bits(widths) -> int:
    widths = np.asarray(widths)
    return int(len(widths) * DIFFUSENESS_BITS + SUBFRAMES * widths.sum())


def capped_widths(diffuseness_index, cap_bits: int) -> np.ndarray:
    """DOA bit widths after fitting the payload into ``cap_bits``.

    Widths are lowered one bit at a time, cycling from the highest band down,
    until the payload fits or every band is at the minimum width.
    """
    widths = np.array([doa_bits(i) for i in np.asarray(diffuseness_index).reshape(-1)], dtype=int)
    n = len(widths)
    b = n - 1
    while payload_bits(widths) > cap_bits and np.any(widths > MIN_DOA_BITS):
        if widths[b] > MIN_DOA_BITS:
            widths[b] -= 1
        b = (b - 1) % n
    return widths


def encode_frame_params(params: FrameParams, cap_bits: int, bands=None) -> QuantizedParamFrame:
    """Quantise one frame's parameters for the bands in ``bands`` (default: all)."""
    n_bands = len(params.diffuseness)
    bands = tuple(range(n_bands)) if bands is None else tuple(bands)
    d_idx = np.asarray(quantize_diffuseness(params.diffuseness[list(bands)])).reshape(-1)
    widths = capped_widths(d_idx, cap_bits)
    doa = np.empty((SUBFRAMES, len(bands)), dtype=int)
    for j, b in enumerate(bands):
        doa[:, j] = spherical_grid(int(widths[j])).quantize_vectors(params.directions[:, b])
    return QuantizedParamFrame(d_idx, doa, widths, bands)


def write_frame_params(writer: BitWriter, q: QuantizedParamFrame):
    """Pack: all diffuseness indices (band order), then per subframe, per band DOA."""
    for i in q.diffuseness_index:
        writer.write(int(i), DIFFUSENESS_BITS)
    for s in range(SUBFRAMES):
        for j, w in enumerate(q.doa_width):
            writer.write(int(q.doa_index[s, j]), int(w))


def read_frame_params(reader: BitReader, cap_bits: int, bands) -> QuantizedParamFrame:
    bands = tuple(bands)
    d_idx = np.array([reader.read(DIFFUSENESS_BITS) for _ in bands], dtype=int)
    widths = capped_widths(d_idx, cap_bits)
    doa = np.empty((SUBFRAMES, len(bands)), dtype=int)
    for s in range(SUBFRAMES):
        for j, w in enumerate(widths):
            idx = reader.read(int(w))
            if idx >= spherical_grid(int(w)).size:
                raise FrameError(f"DOA index {idx} outside {w}-bit grid")
            doa[s, j] = idx
    return QuantizedParamFrame(d_idx, doa, widths, bands)


def decode_frame_params(payload: bytes, cap_bits: int, bands) -> QuantizedParamFrame:
    """Parse a parameter payload that starts at the first bit of ``payload``."""
    return read_frame_params(BitReader(payload), cap_bits, bands)


def frame_params_to_bytes(q: QuantizedParamFrame) -> bytes:
    w = BitWriter()
    write_frame_params(w, q)
    return w.to_bytes()
