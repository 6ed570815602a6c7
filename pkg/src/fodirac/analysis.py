"""DirAC parameter estimation from first-order TF tiles.

Per parameter band and slot the analyser forms the active intensity and the
energy density, derives the direction of arrival from the intensity and the
diffuseness from a moving average over the last ``P`` slots.

Sign convention: AmbiX X/Y/Z are the SH gains towards the source, while the
acoustic particle velocity points away from it. The velocity vector is
therefore ``U = -(X, Y, Z)``, which makes ``-I/|I|`` the source direction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ambisonics import Direction

DIFFUSENESS_SLOTS = 26
DOA_REL_FLOOR = 1e-9
ENERGY_FLOOR = 1e-12

# bin edges at 400 Hz spacing: 0, 800, 2000, 4800, 8000 Hz, then split(s) of the top band
_EDGES_LOW = (0, 2, 5, 12, 20)
_SPLIT_6 = {60: 40, 40: 30}


@dataclass(frozen=True)
class BandGrouping:
    """Contiguous, non-overlapping bin ranges ``[edges[b], edges[b+1])``."""

    edges: tuple[int, ...]

    def __post_init__(self):
        e = tuple(int(v) for v in self.edges)
        if e[0] != 0 or any(b <= a for a, b in zip(e, e[1:])):
            raise ValueError(f"invalid band edges {e}")
        object.__setattr__(self, "edges", e)

    @classmethod
    def default(cls, n_bands: int, n_bins: int) -> "BandGrouping":
        if n_bins not in _SPLIT_6:
            raise ValueError(f"no band table for {n_bins} bins")
        if n_bands == 5:
            return cls(_EDGES_LOW + (n_bins,))
        if n_bands == 6:
            return cls(_EDGES_LOW + (_SPLIT_6[n_bins], n_bins))
        raise ValueError("band count must be 5 or 6")

    @property
    def n_bands(self) -> int:
        return len(self.edges) - 1

    @property
    def n_bins(self) -> int:
        return self.edges[-1]

    def bin_to_band(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_bands), np.diff(self.edges))

    def first_band_at(self, bin_index: int) -> int:
        """Index of the band starting at ``bin_index``."""
        if bin_index not in self.edges[:-1]:
            raise ValueError(f"bin {bin_index} is not a band edge of {self.edges}")
        return self.edges.index(bin_index)

    def band_sum(self, x: np.ndarray) -> np.ndarray:
        """Sum the last axis (bins) within each band."""
        return np.add.reduceat(x, self.edges[:-1], axis=-1)


def band_observe(tf_foa, bands: BandGrouping) -> tuple[np.ndarray, np.ndarray]:
    """Intensity and energy per band.

    Parameters
    ----------
    tf_foa : (4, ..., K) complex array
        W, Y, Z, X coefficients; any slot axes in between are kept.
    bands : BandGrouping

    Returns
    -------
    intensity : (..., B, 3) array, Cartesian x, y, z
    energy : (..., B) array
    """
    tf_foa = np.asarray(tf_foa)
    if tf_foa.shape[0] != 4:
        raise ValueError(f"band_observe needs 4 FOA channels, got {tf_foa.shape[0]}")
    if tf_foa.shape[-1] != bands.n_bins:
        raise ValueError(f"{tf_foa.shape[-1]} bins do not match band grouping over {bands.n_bins}")
    w = tf_foa[0]
    u = -tf_foa[[3, 1, 2]]
    intensity = np.real(w[None] * np.conj(u))
    energy = 0.5 * (np.abs(w) ** 2 + np.sum(np.abs(u) ** 2, axis=0))
    intensity = np.moveaxis(bands.band_sum(intensity), 0, -1)
    return intensity, bands.band_sum(energy)


def doa_vectors(intensity, energy, previous) -> np.ndarray:
    """Unit direction vectors ``-I/|I|``, holding ``previous`` for degenerate bands.

    ``intensity`` is ``(B, 3)``, ``energy`` and the result's leading axis ``B``.
    """
    intensity = np.asarray(intensity, dtype=float)
    norm = np.linalg.norm(intensity, axis=-1)
    energy = np.asarray(energy, dtype=float)
    ok = (energy >= ENERGY_FLOOR) & (norm >= DOA_REL_FLOOR * energy) & (norm > 0)
    safe = np.where(ok, norm, 1.0)
    return np.where(ok[..., None], -intensity / safe[..., None], previous)


def estimate_doa(intensity, energy, previous: Direction | None = None) -> Direction:
    """Direction of arrival of one band observation, with the hold rule."""
    prev = (previous or Direction()).to_vector()
    return Direction.from_vector(doa_vectors(intensity, energy, prev))


def diffuseness_from_sums(intensity_sum, energy_sum) -> np.ndarray:
    """``1 - |sum I| / sum E`` clamped to [0, 1]; 1 where there is no energy."""
    energy_sum = np.asarray(energy_sum, dtype=float)
    norm = np.linalg.norm(intensity_sum, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = 1.0 - norm / energy_sum
    psi = np.where(energy_sum > 0, psi, 1.0)
    return np.clip(psi, 0.0, 1.0)


class DiffusenessEstimator:
    """Moving-average diffuseness over the last ``P`` slots of every band."""

    def __init__(self, n_bands: int, n_slots: int = DIFFUSENESS_SLOTS):
        self.n_bands = n_bands
        self.n_slots = n_slots
        self.reset()

    def reset(self):
        self.intensity = np.zeros((self.n_slots, self.n_bands, 3))
        self.energy = np.zeros((self.n_slots, self.n_bands))
        self._pos = 0

    def push(self, intensity, energy):
        self.intensity[self._pos] = intensity
        self.energy[self._pos] = energy
        self._pos = (self._pos + 1) % self.n_slots

    def estimate(self) -> np.ndarray:
        return diffuseness_from_sums(self.intensity.sum(axis=0), self.energy.sum(axis=0))

    def update(self, intensity, energy) -> np.ndarray:
        self.push(intensity, energy)
        return self.estimate()

    def update_block(self, intensity, energy) -> np.ndarray:
        """Push ``(S, B, 3)`` / ``(S, B)`` slots; returns the ``(S, B)`` estimate after each."""
        p = self.n_slots
        order = np.roll(np.arange(p), -self._pos)  # oldest first
        all_i = np.concatenate([self.intensity[order], intensity])
        all_e = np.concatenate([self.energy[order], energy])
        win_i = sliding_window_view(all_i[1:], p, axis=0).sum(axis=-1)
        win_e = sliding_window_view(all_e[1:], p, axis=0).sum(axis=-1)
        self.intensity, self.energy, self._pos = all_i[-p:].copy(), all_e[-p:].copy(), 0
        return diffuseness_from_sums(win_i, win_e)


def estimate_diffuseness(intensity_history, energy_history) -> np.ndarray:
    """Stateless form: diffuseness from explicit ``(P, B, 3)`` / ``(P, B)`` histories."""
    return diffuseness_from_sums(np.sum(intensity_history, axis=0), np.sum(energy_history, axis=0))


@dataclass
class SlotParams:
    """Unquantised DirAC parameters of ``S`` slots and ``B`` bands."""

    intensity: np.ndarray    # (S, B, 3)
    energy: np.ndarray       # (S, B)
    diffuseness: np.ndarray  # (S, B)
    direction: np.ndarray    # (S, B, 3) unit vectors

    def directions(self) -> list[list[Direction]]:
        return [[Direction.from_vector(v) for v in row] for row in self.direction]


class DiracAnalyzer:
    """Stateful per-stream analyser (diffuseness history and DOA hold)."""

    def __init__(self, bands: BandGrouping, n_slots: int = DIFFUSENESS_SLOTS):
        self.bands = bands
        self.diffuseness = DiffusenessEstimator(bands.n_bands, n_slots)
        self.reset()

    def reset(self):
        self.diffuseness.reset()
        self._last_dir = np.tile([1.0, 0.0, 0.0], (self.bands.n_bands, 1))

    def process(self, tf_foa) -> SlotParams:
        """Analyse ``(4, S, K)`` FOA coefficients slot by slot."""
        intensity, energy = band_observe(tf_foa, self.bands)
        n_slots = intensity.shape[0]
        psi = self.diffuseness.update_block(intensity, energy)
        fresh = doa_vectors(intensity, energy, np.nan)
        # hold rule: carry the last valid direction forward
        valid = ~np.isnan(fresh[..., 0])
        last = np.maximum.accumulate(np.where(valid, np.arange(n_slots)[:, None], -1), axis=0)
        picked = np.take_along_axis(fresh, np.maximum(last, 0)[..., None], axis=0)
        dirs = np.where((last >= 0)[..., None], picked, self._last_dir[None])
        if n_slots:
            self._last_dir = dirs[-1].copy()
        return SlotParams(intensity, energy, psi, dirs)
