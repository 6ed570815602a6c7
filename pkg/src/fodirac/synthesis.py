"""HOA synthesis from transport channels and DirAC parameters.

Output channels fall into three groups:

* channels recoverable from the transport channels, scaled by the energy
  compensation gain ``g``;
* remaining channels up to the diffuse order ``L``: ``g * (g_dir W + g_diff D(W))``;
* channels above ``L``: the directional part ``g_dir W`` only.

Above the decorrelation cutoff the second group is built from ``W`` itself,
with directional and diffuse gains combined in power so the per-order energy
is the same as with decorrelation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ambisonics import MAX_ORDER, TcMode, channel_orders, num_channels, sh_from_vectors
from .analysis import BandGrouping
from .filterbank import BIN_WIDTH_HZ

DECORRELATION_CUTOFF_HZ = 8000.0
DECORRELATOR_DELAYS = (3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)
DECORRELATOR_SEED = 0x0D1AC


def energy_compensation(psi, order_out: int, order_diffuse: int):
    """``sqrt(1 - psi * ((H+1)/(L+1) - 1))``, clamped at 0.

    This is the gain in the form it is usually quoted. It decreases with
    diffuseness and therefore does not restore the energy lost by truncating
    the diffuse field at order ``L``; see :func:`balanced_compensation`.
    """
    _check_orders(order_out, order_diffuse)
    radicand = 1.0 - np.asarray(psi, dtype=float) * ((order_out + 1) / (order_diffuse + 1) - 1.0)
    return np.sqrt(np.maximum(radicand, 0.0))


def balanced_compensation(psi, order_out: int, order_diffuse: int):
    """Gain that makes the synthesised energy equal ``(H+1) |W|^2``.

    Orders ``0..L`` carry ``g^2`` each and orders ``L+1..H`` carry ``1 - psi``,
    so ``g^2 (L+1) + (H-L)(1-psi) = H+1`` gives
    ``g = sqrt(1 + psi * ((H+1)/(L+1) - 1))``.
    """
    _check_orders(order_out, order_diffuse)
    return np.sqrt(1.0 + np.asarray(psi, dtype=float) * ((order_out + 1) / (order_diffuse + 1) - 1.0))


def compensation_radicand(psi, order_out: int, order_diffuse: int):
    return 1.0 - np.asarray(psi, dtype=float) * ((order_out + 1) / (order_diffuse + 1) - 1.0)


def _check_orders(order_out, order_diffuse):
    if not 0 <= order_diffuse <= order_out:
        raise ValueError(f"need 0 <= L <= H, got H={order_out}, L={order_diffuse}")


def compute_gains(psi: float, doa, l: int, m: int) -> tuple[float, float]:
    """Directional and diffuse gains of channel ``(l, m)``."""
    if l > MAX_ORDER or abs(m) > l:
        raise ValueError(f"invalid channel l={l}, m={m}")
    vec = doa.to_vector() if hasattr(doa, "to_vector") else np.asarray(doa, dtype=float)
    y = sh_from_vectors(vec, l)[l * l + l + m]
    return float(np.sqrt(1.0 - psi) * y), float(np.sqrt(psi / (2 * l + 1)))


def gain_tables(psi, dirs, order: int = MAX_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised gains: ``g_dir (..., C)`` and ``g_diff (..., C)``."""
    psi = np.clip(np.asarray(psi, dtype=float), 0.0, 1.0)
    y = sh_from_vectors(dirs, order)
    orders = channel_orders(order)
    g_dir = np.sqrt(1.0 - psi)[..., None] * y
    g_diff = np.sqrt(psi[..., None] / (2 * orders + 1))
    return g_dir, g_diff


class Decorrelator:
    """TF-domain decorrelation of ``W`` into several mutually incoherent signals.

    Output ``i`` is ``W`` delayed by ``DECORRELATOR_DELAYS[i]`` slots with a
    fixed pseudo-random phase per bin. Delays are pairwise at least two slots
    apart, beyond the overlap of adjacent filterbank slots.
    """

    def __init__(self, n_outputs: int, n_bins: int, seed: int = DECORRELATOR_SEED):
        if n_outputs > len(DECORRELATOR_DELAYS):
            raise ValueError(f"at most {len(DECORRELATOR_DELAYS)} decorrelated channels")
        self.n_outputs = n_outputs
        self.n_bins = n_bins
        self.delays = np.array(DECORRELATOR_DELAYS[:n_outputs], dtype=int)
        self.phases = np.stack([
            np.exp(2j * np.pi * np.random.default_rng([seed, i]).random(n_bins))
            for i in range(n_outputs)
        ]) if n_outputs else np.zeros((0, n_bins), complex)
        self._depth = int(self.delays.max()) if n_outputs else 0
        self.reset()

    def reset(self):
        self._history = np.zeros((self._depth, self.n_bins), complex)

    def process(self, w) -> np.ndarray:
        """Decorrelate ``(S, K)`` coefficients, returning ``(n_outputs, S, K)``."""
        w = np.asarray(w)
        if w.shape[-1] != self.n_bins:
            raise ValueError(f"expected {self.n_bins} bins, got {w.shape[-1]}")
        n = w.shape[0]
        buf = np.concatenate([self._history, w])
        if self._depth:
            self._history = buf[-self._depth:].copy()
        out = np.empty((self.n_outputs, n, self.n_bins), complex)
        for i, d in enumerate(self.delays):
            out[i] = buf[self._depth - d:self._depth - d + n] * self.phases[i]
        return out


def decorrelate(x, channel_index: int, seed: int = DECORRELATOR_SEED) -> np.ndarray:
    """Stateless decorrelation of a whole ``(S, K)`` signal, zero history."""
    x = np.asarray(x)
    dec = Decorrelator(channel_index + 1, x.shape[-1], seed)
    return dec.process(x)[channel_index]


@dataclass
class SynthesisConfig:
    tc_mode: TcMode
    bands: BandGrouping
    order_out: int = MAX_ORDER
    order_diffuse: int | None = None
    cutoff_hz: float = DECORRELATION_CUTOFF_HZ
    decoder_analysis: bool | None = None
    interpolate: bool = True
    compensation: str = "balanced"
    direct_channels: tuple[int, ...] = field(default=())

    def __post_init__(self):
        self.tc_mode = TcMode(self.tc_mode)
        if self.order_diffuse is None:
            self.order_diffuse = 2 if self.tc_mode is TcMode.FOA4 else 1
        if self.decoder_analysis is None:
            self.decoder_analysis = self.tc_mode is TcMode.FOA4
        if not self.direct_channels:
            self.direct_channels = self.tc_mode.direct_channels
        _check_orders(self.order_out, self.order_diffuse)
        if self.compensation not in ("balanced", "decreasing"):
            raise ValueError(f"unknown compensation {self.compensation!r}")
        direct_order = int(channel_orders(self.order_out)[max(self.direct_channels)])
        if direct_order > self.order_diffuse:
            raise ValueError("directly transmitted order exceeds the diffuse order")
        self.bands.first_band_at(self.cutoff_bin)

    @property
    def cutoff_bin(self) -> int:
        return int(round(self.cutoff_hz / BIN_WIDTH_HZ))

    @property
    def low_bands(self) -> tuple[int, ...]:
        """Bands below the decorrelation cutoff."""
        return tuple(range(self.bands.first_band_at(self.cutoff_bin)))

    @property
    def decorrelated_channels(self) -> tuple[int, ...]:
        orders = channel_orders(self.order_out)
        return tuple(c for c in range(num_channels(self.order_out))
                     if orders[c] <= self.order_diffuse and c not in self.direct_channels)

    def compensation_gain(self, psi):
        fn = balanced_compensation if self.compensation == "balanced" else energy_compensation
        return fn(psi, self.order_out, self.order_diffuse)


class HoaSynthesizer:
    """Per-stream synthesis state: decorrelator history and the last subframe gains."""

    def __init__(self, config: SynthesisConfig):
        self.config = config
        self.n_out = num_channels(config.order_out)
        self.decorrelator = Decorrelator(len(config.decorrelated_channels), config.cutoff_bin)
        self.clamp_events = 0
        self.reset()

    def reset(self):
        self.decorrelator.reset()
        self._prev = None
        self.clamp_events = 0

    def _gains(self, psi, dirs):
        cfg = self.config
        g = cfg.compensation_gain(psi)
        g_dir, g_diff = gain_tables(psi, dirs, cfg.order_out)
        return g, g_dir, g_diff

    def _smooth(self, gains, smooth_bands, slots_per_subframe: int):
        """Linear ramps from the previous subframe's gains towards each subframe's."""
        if self._prev is None:
            self._prev = tuple(x[0].copy() for x in gains)
        prev = self._prev
        self._prev = tuple(x[-1].copy() for x in gains)
        if not self.config.interpolate or not len(smooth_bands):
            return gains
        sb = list(smooth_bands)
        alpha = (np.arange(slots_per_subframe) + 1) / slots_per_subframe
        out = [x.copy() for x in gains]
        for k, x in enumerate(gains):
            p = prev[k][sb]
            for start in range(0, x.shape[0], slots_per_subframe):
                target = x[start + slots_per_subframe - 1, sb]
                a = alpha.reshape((-1,) + (1,) * target.ndim)
                out[k][start:start + slots_per_subframe, sb] = (1 - a) * p + a * target
                p = target
        return tuple(out)

    def process(self, direct_tf, psi, dirs, smooth_bands=(), slots_per_subframe: int = 4):
        """Synthesise ``(C_out, S, K)`` HOA coefficients.

        Parameters
        ----------
        direct_tf : (n_direct, S, K) complex
            Directly recovered ACN channels; row 0 is ``W``.
        psi : (S, B)
            Diffuseness per slot and band.
        dirs : (S, B, 3)
            DOA unit vectors per slot and band.
        smooth_bands : sequence of int
            Bands whose parameters are held per subframe and get gain ramps.
        """
        cfg = self.config
        direct_tf = np.asarray(direct_tf)
        n_direct, n_slots, n_bins = direct_tf.shape
        if n_direct != len(cfg.direct_channels) or n_bins != cfg.bands.n_bins:
            raise ValueError(f"direct channels {direct_tf.shape} do not match configuration")
        psi = np.asarray(psi, dtype=float)
        if psi.shape != (n_slots, cfg.bands.n_bands):
            raise ValueError(f"diffuseness shape {psi.shape} does not match {n_slots} slots x {cfg.bands.n_bands} bands")
        if cfg.compensation == "decreasing":
            self.clamp_events += int(np.sum(compensation_radicand(psi, cfg.order_out, cfg.order_diffuse) < 0))
        g, g_dir, g_diff = self._smooth(self._gains(psi, dirs), smooth_bands, slots_per_subframe)
        band_of_bin = cfg.bands.bin_to_band()
        g = g[:, band_of_bin]                      # (S, K)
        g_dir = np.moveaxis(g_dir[:, band_of_bin], -1, 0)   # (C, S, K)
        g_diff = np.moveaxis(g_diff[:, band_of_bin], -1, 0)

        w = direct_tf[0]
        cut = cfg.cutoff_bin
        out = g_dir * w[None]
        for i, c in enumerate(cfg.direct_channels):
            out[c] = g * direct_tf[i]
        dec = self.decorrelator.process(w[:, :cut])
        for i, c in enumerate(cfg.decorrelated_channels):
            low = g[:, :cut] * (g_dir[c, :, :cut] * w[:, :cut] + g_diff[c, :, :cut] * dec[i])
            sign = np.where(g_dir[c, :, cut:] < 0, -1.0, 1.0)
            mag = np.sqrt(g_dir[c, :, cut:] ** 2 + g_diff[c, :, cut:] ** 2)
            high = g[:, cut:] * sign * mag * w[:, cut:]
            out[c] = np.concatenate([low, high], axis=-1)
        return out


def synthesize_hoa(direct_tf, psi, dirs, config: SynthesisConfig, smooth_bands=()) -> np.ndarray:
    """Stateless synthesis of one block (fresh decorrelator, no gain history)."""
    return HoaSynthesizer(config).process(direct_tf, psi, dirs, smooth_bands)
