"""Real spherical harmonics (ACN channel order, SN3D normalisation), plane-wave
panning and transport-channel downmix matrices.

Angles follow the AmbiX convention: azimuth counter-clockwise from +X towards
+Y, elevation upwards from the horizontal plane. Channel ``acn = l*l + l + m``
so the first-order channels are W, Y, Z, X.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

MAX_ORDER = 3


class UnsupportedOrderError(ValueError):
    pass


def num_channels(order: int) -> int:
    return (order + 1) ** 2


def to_acn(l, m):
    """Ambisonic channel number for order ``l`` and degree ``m``."""
    return l * l + l + m


def from_acn(acn):
    """Order and degree of a given ambisonic channel number."""
    acn = np.asarray(acn)
    l = np.floor(np.sqrt(acn)).astype(int)
    return l, acn - l * l - l


def order_of_channels(n_channels: int) -> int:
    order = int(round(np.sqrt(n_channels))) - 1
    if num_channels(order) != n_channels:
        raise ValueError(f"{n_channels} is not a full ambisonic channel count")
    return order


def channel_orders(order: int) -> np.ndarray:
    """Order ``l`` of every ACN channel up to ``order``."""
    return from_acn(np.arange(num_channels(order)))[0]


@dataclass(frozen=True)
class Direction:
    """A point on the unit sphere, in radians.

    Construction canonicalises the angles: azimuth is wrapped to [-pi, pi)
    and set to 0 at the poles.
    """

    azimuth: float = 0.0
    elevation: float = 0.0

    def __post_init__(self):
        el = float(self.elevation)
        if not -np.pi / 2 - 1e-12 <= el <= np.pi / 2 + 1e-12:
            raise ValueError(f"elevation {el} outside [-pi/2, pi/2]")
        el = float(np.clip(el, -np.pi / 2, np.pi / 2))
        az = float((float(self.azimuth) + np.pi) % (2 * np.pi) - np.pi)
        if abs(abs(el) - np.pi / 2) < 1e-12:
            el = float(np.copysign(np.pi / 2, el))
            az = 0.0
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)

    @classmethod
    def from_degrees(cls, azimuth: float, elevation: float = 0.0) -> "Direction":
        return cls(np.deg2rad(azimuth), np.deg2rad(elevation))

    @classmethod
    def from_vector(cls, v) -> "Direction":
        x, y, z = (float(c) for c in v)
        r = np.hypot(np.hypot(x, y), z)
        if r == 0.0:
            raise ValueError("zero vector has no direction")
        el = float(np.arcsin(np.clip(z / r, -1.0, 1.0)))
        if np.hypot(x, y) <= 1e-15 * r:
            return cls(0.0, np.copysign(np.pi / 2, z))
        return cls(float(np.arctan2(y, x)), el)

    def to_vector(self) -> np.ndarray:
        ce = np.cos(self.elevation)
        return np.array([ce * np.cos(self.azimuth), ce * np.sin(self.azimuth), np.sin(self.elevation)])

    def degrees(self) -> tuple[float, float]:
        return float(np.rad2deg(self.azimuth)), float(np.rad2deg(self.elevation))


def sh_from_vectors(xyz, order: int = MAX_ORDER) -> np.ndarray:
    """Evaluate SN3D real spherical harmonics for unit vectors.

    Parameters
    ----------
    xyz : (..., 3) array_like
        Unit direction vectors.
    order : int
        Maximum order, at most 3.

    Returns
    -------
    (..., (order+1)**2) ndarray in ACN order.
    """
    if not 0 <= order <= MAX_ORDER:
        raise UnsupportedOrderError(f"order {order} not supported (max {MAX_ORDER})")
    xyz = np.asarray(xyz, dtype=float)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    out = [np.ones_like(x)]
    if order >= 1:
        out += [y, z, x]
    if order >= 2:
        s3 = np.sqrt(3.0)
        out += [
            s3 * x * y,
            s3 * y * z,
            0.5 * (3.0 * z * z - 1.0),
            s3 * x * z,
            0.5 * s3 * (x * x - y * y),
        ]
    if order >= 3:
        a = np.sqrt(5.0 / 8.0)
        b = np.sqrt(15.0)
        c = np.sqrt(3.0 / 8.0)
        z2 = z * z
        out += [
            a * y * (3.0 * x * x - y * y),
            b * x * y * z,
            c * y * (5.0 * z2 - 1.0),
            0.5 * z * (5.0 * z2 - 3.0),
            c * x * (5.0 * z2 - 1.0),
            0.5 * b * z * (x * x - y * y),
            a * x * (x * x - 3.0 * y * y),
        ]
    return np.stack(out, axis=-1)


def sh_eval(direction: Direction, order: int = MAX_ORDER) -> np.ndarray:
    """SN3D spherical harmonics of one direction, ACN order; ``values[0] == 1``."""
    return sh_from_vectors(direction.to_vector(), order)


@dataclass
class AmbisonicFrame:
    """Time-domain ambisonic signals, shape ``(channels, samples)``."""

    signals: np.ndarray
    sample_rate: int = 48000

    def __post_init__(self):
        self.signals = np.atleast_2d(np.asarray(self.signals))
        order_of_channels(self.signals.shape[0])

    @property
    def order(self) -> int:
        return order_of_channels(self.signals.shape[0])

    @property
    def n_samples(self) -> int:
        return self.signals.shape[1]

    def truncate(self, order: int) -> "AmbisonicFrame":
        if order > self.order:
            raise ValueError(f"cannot truncate order {self.order} signal to order {order}")
        return AmbisonicFrame(self.signals[: num_channels(order)], self.sample_rate)


def pan_source(mono, direction: Direction, order: int = MAX_ORDER, sample_rate: int = 48000) -> AmbisonicFrame:
    """Encode a mono signal as a plane wave from ``direction``."""
    gains = sh_eval(direction, order)
    mono = np.asarray(mono, dtype=float).reshape(-1)
    return AmbisonicFrame(gains[:, None] * mono[None, :], sample_rate)


class TcMode(enum.IntEnum):
    """Transport-channel configuration; the value is the channel count."""

    MONO1 = 1
    STEREO2 = 2
    FOA4 = 4

    @property
    def n_channels(self) -> int:
        return int(self.value)

    @property
    def direct_channels(self) -> tuple[int, ...]:
        """ACN channels recoverable from the transport channels."""
        return {1: (0,), 2: (0, 1), 4: (0, 1, 2, 3)}[self.value]


def downmix(foa, mode: TcMode) -> np.ndarray:
    """Select the transport channels from an ambisonic signal.

    ``foa`` is an :class:`AmbisonicFrame` or an array ``(channels, ...)`` in ACN
    order with at least four channels; higher orders are ignored. The stereo
    mode forms left/right cardioids ``(W +/- Y) / 2``.
    """
    sig = foa.signals if isinstance(foa, AmbisonicFrame) else np.asarray(foa)
    if sig.shape[0] < 4:
        raise ValueError("downmix needs at least first-order input")
    w, y = sig[0], sig[1]
    mode = TcMode(mode)
    if mode is TcMode.MONO1:
        return w[None].copy()
    if mode is TcMode.STEREO2:
        return np.stack([0.5 * (w + y), 0.5 * (w - y)])
    return sig[:4].copy()


def upmix_transport(tc, mode: TcMode) -> np.ndarray:
    """Invert :func:`downmix`, returning the directly recoverable ACN channels."""
    tc = np.asarray(tc)
    mode = TcMode(mode)
    if tc.shape[0] != mode.n_channels:
        raise ValueError(f"expected {mode.n_channels} transport channels, got {tc.shape[0]}")
    if mode is TcMode.STEREO2:
        return np.stack([tc[0] + tc[1], tc[0] - tc[1]])
    return tc.copy()
