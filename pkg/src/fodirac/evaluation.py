"""Synthetic scenes and objective metrics for the codec."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .ambisonics import MAX_ORDER, AmbisonicFrame, Direction, channel_orders, num_channels, sh_from_vectors
from .analysis import BandGrouping, DiracAnalyzer
from .codec import CodecConfig, Decoder, Encoder, frames_of
from .filterbank import SLOTS_PER_FRAME, Filterbank, n_bins
from .quantization import SUBFRAMES, downsample_params, doa_bits, quantize_diffuseness, spherical_grid

# generating point of a 120-point orbit of the full icosahedral group on which
# the degree-6 invariant harmonic vanishes; the orbit is then a spherical 7-design
_DESIGN_SEED = (1.0573608092407616, 1.3415163146293438)


def central_angle(a, b) -> float:
    """Great-circle angle between two directions (or unit vectors), in degrees."""
    va = a.to_vector() if isinstance(a, Direction) else np.asarray(a, dtype=float)
    vb = b.to_vector() if isinstance(b, Direction) else np.asarray(b, dtype=float)
    va = va / np.linalg.norm(va, axis=-1, keepdims=True)
    vb = vb / np.linalg.norm(vb, axis=-1, keepdims=True)
    return np.degrees(np.arccos(np.clip(np.sum(va * vb, axis=-1), -1.0, 1.0)))


def _rotation(axis, angle):
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * k @ k


@lru_cache(maxsize=None)
def icosahedral_group() -> np.ndarray:
    """The 120 orthogonal matrices of the full icosahedral group."""
    phi = (1 + np.sqrt(5.0)) / 2
    gens = [_rotation([0, 1, phi], 2 * np.pi / 5), _rotation([0, 0, 1], np.pi)]
    group = [np.eye(3)]
    frontier = [np.eye(3)]
    while frontier:
        new = []
        for g in frontier:
            for h in gens:
                p = h @ g
                if not any(np.abs(p - q).max() < 1e-9 for q in group):
                    group.append(p)
                    new.append(p)
        frontier = new
    rot = np.array(group)
    return np.concatenate([rot, -rot])


@lru_cache(maxsize=None)
def spherical_design() -> np.ndarray:
    """120 unit vectors forming a spherical 7-design."""
    az, el = _DESIGN_SEED
    p = np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
    return icosahedral_group() @ p


@dataclass
class Source:
    direction: Direction
    signal: np.ndarray | None = None  # None: white noise
    gain: float = 1.0


@dataclass
class SceneSpec:
    sources: list[Source] = field(default_factory=list)
    diffuse_level: float = 0.0  # power of the isotropic part relative to a unit-power source
    duration: float = 1.0
    sample_rate: int = 48000
    seed: int = 0

    def __post_init__(self):
        if not self.sources and self.diffuse_level <= 0:
            raise ValueError("scene needs at least one component")


@dataclass
class GroundTruth:
    """Per frame, subframe and band: true DOA vectors and diffuse energy ratio."""

    directions: np.ndarray   # (F, 4, B, 3), zero where no directional energy
    diffuseness: np.ndarray  # (F, 4, B)
    frame_diffuseness: np.ndarray  # (F, B)


@dataclass
class Scene:
    frame: AmbisonicFrame
    truth: GroundTruth
    spec: SceneSpec


def _band_energy(w, bands, sample_rate):
    """W-channel energy per frame, subframe and band."""
    tf = Filterbank(1, sample_rate).analyze(w[None])[0]
    e = bands.band_sum(np.abs(tf) ** 2)  # (S, B)
    n_frames = e.shape[0] // SLOTS_PER_FRAME
    return e[: n_frames * SLOTS_PER_FRAME].reshape(n_frames, SUBFRAMES, -1, e.shape[-1]).sum(axis=2)


def gen_scene(spec: SceneSpec, order: int = MAX_ORDER, bands: BandGrouping | None = None) -> Scene:
    """Render a scene to ambisonics together with its ground-truth parameters."""
    fs = spec.sample_rate
    bands = bands or BandGrouping.default(5, n_bins(fs))
    n = int(round(spec.duration * fs))
    rng = np.random.default_rng(spec.seed)
    out = np.zeros((num_channels(order), n))
    dir_energy = None
    dir_vec = None
    for src in spec.sources:
        sig = rng.standard_normal(n) if src.signal is None else np.asarray(src.signal, dtype=float)[:n]
        sig = src.gain * sig
        v = src.direction.to_vector()
        out += sh_from_vectors(v, order)[:, None] * sig[None]
        e = _band_energy(sig, bands, fs)
        dir_energy = e if dir_energy is None else dir_energy + e
        contrib = e[..., None] * v
        dir_vec = contrib if dir_vec is None else dir_vec + contrib
    diff_energy = 0.0
    if spec.diffuse_level > 0:
        pts = spherical_design()
        noise = rng.standard_normal((len(pts), n)) * np.sqrt(spec.diffuse_level / len(pts))
        out += sh_from_vectors(pts, order).T @ noise
        diff_energy = _band_energy(noise.sum(axis=0), bands, fs)
    if dir_energy is None:
        dir_energy = np.zeros_like(diff_energy)
        dir_vec = np.zeros(dir_energy.shape + (3,))
    diff_energy = np.broadcast_to(diff_energy, dir_energy.shape)
    total = dir_energy + diff_energy
    with np.errstate(invalid="ignore", divide="ignore"):
        psi = np.where(total > 0, diff_energy / total, 0.0)
        norms = np.linalg.norm(dir_vec, axis=-1, keepdims=True)
        dirs = np.where(norms > 0, dir_vec / np.where(norms > 0, norms, 1), 0.0)
        t_frame = total.sum(axis=1)
        frame_psi = np.where(t_frame > 0, diff_energy.sum(axis=1) / t_frame, 0.0)
    return Scene(AmbisonicFrame(out, fs), GroundTruth(dirs, psi, frame_psi), spec)


def plane_wave_scene(direction: Direction, diffuse_fraction: float = 0.0, duration: float = 1.0,
                     sample_rate: int = 48000, seed: int = 0) -> SceneSpec:
    """One white-noise source plus isotropic noise, ``diffuse_fraction`` of the total power."""
    if diffuse_fraction >= 1.0:
        return SceneSpec([], 1.0, duration, sample_rate, seed)
    gain = np.sqrt(1.0 - diffuse_fraction)
    return SceneSpec([Source(direction, None, gain)], diffuse_fraction, duration, sample_rate, seed)


def random_direction(rng) -> Direction:
    v = rng.standard_normal(3)
    return Direction.from_vector(v / np.linalg.norm(v))


SWEEP_FIELDS = ("psi_lo", "psi_hi", "count", "mean_deg", "std_deg", "half_step_deg")


def doa_error_vs_diffuseness(mix_ratios, duration: float = 1.0, repeats: int = 2, bin_width: float = 0.1,
                             sample_rate: int = 48000, seed: int = 0, warmup_frames: int = 3) -> list[dict]:
    """Spread of subframe DOA estimates as a function of estimated diffuseness.

    For every diffuse mix ratio, scenes with one source at a random direction
    are analysed; each (subframe, band) DOA error is binned by the estimated
    frame diffuseness of its band. ``half_step_deg`` is half the ring spacing of
    the grid the coder would use for that bin's diffuseness.
    """
    bands = BandGrouping.default(5, n_bins(sample_rate))
    edges = np.arange(0.0, 1.0 + 1e-9, bin_width)
    errors = [[] for _ in range(len(edges) - 1)]
    rng = np.random.default_rng(seed)
    for ratio in mix_ratios:
        for _ in range(repeats):
            d = random_direction(rng)
            spec = plane_wave_scene(d, float(ratio), duration, sample_rate, int(rng.integers(2**31)))
            scene = gen_scene(spec, 1, bands)
            fb = Filterbank(4, sample_rate)
            analyzer = DiracAnalyzer(bands)
            for i, frame in enumerate(frames_of(scene.frame.signals, SLOTS_PER_FRAME * bands.n_bins)):
                params = downsample_params(analyzer.process(fb.analyze(frame)))
                if i < warmup_frames:
                    continue
                ang = central_angle(params.directions, d.to_vector())  # (4, B)
                for b, psi in enumerate(params.diffuseness):
                    k = min(int(psi / bin_width), len(errors) - 1)
                    errors[k].extend(ang[:, b].tolist())
    rows = []
    for k, errs in enumerate(errors):
        if not errs:
            continue
        centre = (edges[k] + edges[k + 1]) / 2
        step = spherical_grid(doa_bits(quantize_diffuseness(centre))).nominal_step
        rows.append(dict(psi_lo=round(edges[k], 6), psi_hi=round(edges[k + 1], 6), count=len(errs),
                         mean_deg=float(np.mean(errs)), std_deg=float(np.std(errs)),
                         half_step_deg=float(np.degrees(step) / 2)))
    return rows


def rows_to_csv(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in fields})
    return buf.getvalue()


@dataclass
class MetricReport:
    doa_mean_deg: list[float]        # per band
    doa_std_deg: list[float]
    diffuseness_mae: float
    order_power_ratio: list[float]   # decoded/reference power per order
    order_power_profile: list[float]  # decoded mean channel power per order, relative to W
    energy_ratio: float              # decoded total / ((H+1) * transmitted W)
    reference_energy_ratio: float    # decoded total / reference total
    clamp_events: int
    frames: int

    def rows(self) -> list[dict]:
        out = []
        for k, v in asdict(self).items():
            if isinstance(v, list):
                out += [dict(metric=k, index=i, value=x) for i, x in enumerate(v)]
            else:
                out.append(dict(metric=k, index="", value=v))
        return out


REPORT_FIELDS = ("metric", "index", "value")


def _ratio(a, b):
    return float(a / b) if b > 0 else 0.0


def codec_metrics(scene: Scene, config: CodecConfig, warmup_frames: int = 3) -> MetricReport:
    """Encode and decode ``scene`` with pass-through transport and compare.

    The first ``warmup_frames`` frames (diffuseness window fill) are excluded.
    """
    if config.transport != "passthrough":
        config = CodecConfig(config.bitrate, config.sample_rate, config.tc_mode, "passthrough",
                             config.input_order, config.interpolate, config.compensation)
    sig = scene.frame.signals
    ref = np.zeros((num_channels(MAX_ORDER), sig.shape[1]))
    ref[: min(16, sig.shape[0])] = sig[:16]
    enc, dec = Encoder(config), Decoder(config)
    bands = config.bands
    truth_bands = scene.truth.directions.shape[2]
    outs, d_err, psi_err = [], [[] for _ in range(bands.n_bands)], []
    for i, frame in enumerate(frames_of(sig[: max(4, num_channels(config.input_order))], config.frame_length)):
        outs.append(dec.decode_frame(enc.encode_frame(frame)))
        if i < warmup_frames or i >= scene.truth.directions.shape[0]:
            continue
        p = dec.last_params
        for b in range(min(bands.n_bands, truth_bands)):
            psi_err.append(abs(float(p.diffuseness[:, b].mean()) - float(scene.truth.frame_diffuseness[i, b])))
            for s in range(SUBFRAMES):
                t = scene.truth.directions[i, s, b]
                if np.linalg.norm(t) > 0:
                    d_err[b].append(float(central_angle(p.directions[4 * s + 3, b], t)))
    out = np.concatenate(outs, axis=1)
    lat = dec.latency
    start = warmup_frames * config.frame_length
    dec_seg = out[:, start + lat:]
    ref_seg = ref[:, start: start + dec_seg.shape[1]]
    dec_seg = dec_seg[:, : ref_seg.shape[1]]
    p_dec = np.sum(dec_seg ** 2, axis=1)
    p_ref = np.sum(ref_seg ** 2, axis=1)
    orders = channel_orders(MAX_ORDER)
    order_ratio = [_ratio(p_dec[orders == l].sum(), p_ref[orders == l].sum()) for l in range(MAX_ORDER + 1)]
    profile = [_ratio(p_dec[orders == l].mean(), p_dec[0]) for l in range(MAX_ORDER + 1)]
    return MetricReport(
        doa_mean_deg=[float(np.mean(e)) if e else 0.0 for e in d_err],
        doa_std_deg=[float(np.std(e)) if e else 0.0 for e in d_err],
        diffuseness_mae=float(np.mean(psi_err)) if psi_err and p_ref.sum() > 0 else 0.0,
        order_power_ratio=order_ratio,
        order_power_profile=profile,
        energy_ratio=_ratio(p_dec.sum(), (MAX_ORDER + 1) * p_ref[0]),
        reference_energy_ratio=_ratio(p_dec.sum(), p_ref.sum()),
        clamp_events=dec.synthesizer.clamp_events,
        frames=len(outs),
    )
