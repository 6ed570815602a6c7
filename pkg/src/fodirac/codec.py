"""Encoder and decoder wiring the analysis, parameter, transport and synthesis stages."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .ambisonics import MAX_ORDER, AmbisonicFrame, TcMode, downmix, num_channels, order_of_channels, upmix_transport
from .analysis import BandGrouping, DiracAnalyzer, SlotParams
from .bitstream import BitReader, BitWriter, FrameError, StreamHeader, demux, frame_bits, frame_bytes, mux
from .filterbank import Filterbank, check_rate, frame_length, n_bins
from .quantization import (
    SLOTS_PER_SUBFRAME, SUBFRAMES, FrameParams, QuantizedParamFrame, downsample_params,
    encode_frame_params, read_frame_params, write_frame_params,
)
from .synthesis import HoaSynthesizer, SynthesisConfig
from .transport import MODES, decode_tc, encode_tc

log = logging.getLogger(__name__)

SUPPORTED_BITRATES = (32000, 48000, 64000, 96000, 128000)

# TC count -> (lowest bitrate, highest bitrate, cap at lowest, cap at highest), bps
MODE_TABLE = {
    1: (13200, 32000, 3500.0, 8500.0),
    2: (48000, 96000, 6000.0, 10000.0),
    4: (96000, 128000, 4800.0, 4800.0),
}


class ConfigError(ValueError):
    pass


def auto_tc_mode(bitrate: int) -> TcMode:
    if bitrate <= 32000:
        return TcMode.MONO1
    if bitrate <= 96000:
        return TcMode.STEREO2
    return TcMode.FOA4


def parameter_cap_bits(bitrate: int, tc_mode: TcMode) -> int:
    """Parameter budget per frame, interpolated within the mode's bitrate row."""
    lo, hi, cap_lo, cap_hi = MODE_TABLE[int(tc_mode)]
    t = float(np.clip((bitrate - lo) / (hi - lo), 0.0, 1.0))
    cap = cap_lo + t * (cap_hi - cap_lo)
    return int(np.floor(cap * 0.02 + 1e-9))


@dataclass(frozen=True)
class CodecConfig:
    bitrate: int
    sample_rate: int = 48000
    tc_mode: TcMode | None = None
    transport: str = "scalarq"
    input_order: int = MAX_ORDER
    interpolate: bool = True
    compensation: str = "balanced"

    def __post_init__(self):
        if self.bitrate not in SUPPORTED_BITRATES:
            raise ConfigError(f"unsupported bitrate {self.bitrate}; use one of {SUPPORTED_BITRATES}")
        try:
            check_rate(self.sample_rate)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        mode = auto_tc_mode(self.bitrate) if self.tc_mode is None else TcMode(self.tc_mode)
        object.__setattr__(self, "tc_mode", mode)
        if self.transport not in MODES:
            raise ConfigError(f"unknown transport {self.transport!r}")
        if not 1 <= self.input_order <= MAX_ORDER:
            raise ConfigError("input order must be 1..3")

    @classmethod
    def from_header(cls, header: StreamHeader, **kw) -> "CodecConfig":
        return cls(header.bitrate, header.sample_rate, TcMode(header.n_tc), header.transport,
                   header.input_order, **kw)

    @property
    def n_bands(self) -> int:
        return 6 if self.tc_mode is TcMode.FOA4 else 5

    @property
    def bands(self) -> BandGrouping:
        return BandGrouping.default(self.n_bands, n_bins(self.sample_rate))

    @property
    def output_order(self) -> int:
        return MAX_ORDER

    @property
    def diffuse_order(self) -> int:
        return 2 if self.tc_mode is TcMode.FOA4 else 1

    @property
    def cap_bits(self) -> int:
        return parameter_cap_bits(self.bitrate, self.tc_mode)

    @property
    def frame_bits(self) -> int:
        return frame_bits(self.bitrate)

    @property
    def frame_length(self) -> int:
        return frame_length(self.sample_rate)

    def synthesis_config(self) -> SynthesisConfig:
        return SynthesisConfig(self.tc_mode, self.bands, self.output_order, self.diffuse_order,
                               interpolate=self.interpolate, compensation=self.compensation)

    @property
    def coded_bands(self) -> tuple[int, ...]:
        """Bands whose parameters are transmitted; 4 TC codes only those above 8 kHz."""
        syn = self.synthesis_config()
        if syn.decoder_analysis:
            return tuple(range(len(syn.low_bands), self.n_bands))
        return tuple(range(self.n_bands))

    def header(self) -> StreamHeader:
        return StreamHeader(self.sample_rate, self.bitrate, int(self.tc_mode), self.input_order,
                            self.n_bands, self.transport)


def _as_pcm(pcm, n_channels=None) -> np.ndarray:
    sig = pcm.signals if isinstance(pcm, AmbisonicFrame) else np.asarray(pcm)
    sig = np.atleast_2d(sig)
    # the codec works on float32 PCM, like the file format
    return sig.astype(np.float32).astype(np.float64)


class Encoder:
    def __init__(self, config: CodecConfig):
        self.config = config
        self.filterbank = Filterbank(4, config.sample_rate)
        self.analyzer = DiracAnalyzer(config.bands)
        self.reset()

    def reset(self):
        self.filterbank.reset()
        self.analyzer.reset()
        self.frame_count = 0
        self.last_slot_params: SlotParams | None = None
        self.last_frame_params: FrameParams | None = None
        self.last_quantized: QuantizedParamFrame | None = None
        self.last_param_bits = 0
        self.last_tc_bits = 0

    @property
    def latency(self) -> int:
        return self.filterbank.latency

    @property
    def frame_size(self) -> int:
        return self.config.header().frame_size(self.config.frame_length)

    def encode_frame(self, pcm) -> bytes:
        """Encode one 20 ms frame of ``(channels, samples)`` ambisonics."""
        cfg = self.config
        sig = _as_pcm(pcm)
        if sig.shape[0] < 4:
            raise ConfigError("encoder needs at least first-order input")
        order_of_channels(sig.shape[0])
        if sig.shape[1] != cfg.frame_length:
            raise ConfigError(f"frame must have {cfg.frame_length} samples, got {sig.shape[1]}")
        foa = sig[:4]
        tf = self.filterbank.analyze(foa)
        slots = self.analyzer.process(tf)
        params = downsample_params(slots)
        q = encode_frame_params(params, cfg.cap_bits, cfg.coded_bands)

        writer = BitWriter()
        write_frame_params(writer, q)
        param_bits = writer.n_bits
        if param_bits > cfg.cap_bits:
            raise AssertionError("parameter payload over cap")
        tc = downmix(foa, cfg.tc_mode)
        budget = cfg.frame_bits - param_bits
        if cfg.transport == "scalarq":
            encode_tc(tc, budget, "scalarq", writer)
        tc_bits = writer.n_bits - param_bits
        assert cfg.frame_bits - writer.n_bits >= 0
        data = writer.to_bytes(frame_bytes(cfg.bitrate))
        if cfg.transport == "passthrough":
            data += encode_tc(tc, None, "passthrough").to_bytes()

        self.last_slot_params, self.last_frame_params, self.last_quantized = slots, params, q
        self.last_param_bits, self.last_tc_bits = param_bits, tc_bits
        self.frame_count += 1
        return data


@dataclass
class DecodedParams:
    """Parameters used for synthesis of one frame, per slot and band."""

    diffuseness: np.ndarray  # (S, B)
    directions: np.ndarray   # (S, B, 3)
    quantized: QuantizedParamFrame | None = None
    decoder_analysis: SlotParams | None = None


@dataclass
class DecodeError:
    frame_index: int
    message: str


class Decoder:
    def __init__(self, config: CodecConfig):
        self.config = config
        self.synthesis = config.synthesis_config()
        self.tc_filterbank = Filterbank(config.tc_mode.n_channels, config.sample_rate)
        self.out_filterbank = Filterbank(num_channels(config.output_order), config.sample_rate)
        self.synthesizer = HoaSynthesizer(self.synthesis)
        self.analyzer = DiracAnalyzer(config.bands) if self.synthesis.decoder_analysis else None
        self.reset()

    @classmethod
    def from_header(cls, header: StreamHeader, **kw) -> "Decoder":
        return cls(CodecConfig.from_header(header, **kw))

    def reset(self):
        self.tc_filterbank.reset()
        self.out_filterbank.reset()
        self.synthesizer.reset()
        if self.analyzer is not None:
            self.analyzer.reset()
        self.frame_count = 0
        self.errors: list[DecodeError] = []
        self.last_params: DecodedParams | None = None
        n_b = self.config.n_bands
        self._psi = np.ones(n_b)
        self._dirs = np.tile([1.0, 0.0, 0.0], (SUBFRAMES, n_b, 1))

    @property
    def latency(self) -> int:
        return self.out_filterbank.latency

    def parse_frame(self, data: bytes) -> tuple[QuantizedParamFrame, np.ndarray]:
        cfg = self.config
        size = cfg.header().frame_size(cfg.frame_length)
        if len(data) != size:
            raise FrameError(f"frame is {len(data)} bytes, expected {size}")
        cbr = frame_bytes(cfg.bitrate)
        reader = BitReader(data[:cbr])
        q = read_frame_params(reader, cfg.cap_bits, cfg.coded_bands)
        n_tc = cfg.tc_mode.n_channels
        if cfg.transport == "scalarq":
            tc = decode_tc(reader, n_tc, cfg.frame_length, "scalarq")
        else:
            tc = decode_tc(BitReader(data[cbr:]), n_tc, cfg.frame_length, "passthrough")
        return q, tc

    def decode_frame(self, data: bytes) -> np.ndarray:
        """Decode one frame to ``(16, samples)`` HOA; a bad frame yields silence."""
        cfg = self.config
        index = self.frame_count
        self.frame_count += 1
        try:
            q, tc = self.parse_frame(data)
        except FrameError as e:
            log.warning("frame %d: %s", index, e)
            self.errors.append(DecodeError(index, str(e)))
            q, tc = None, np.zeros((cfg.tc_mode.n_channels, cfg.frame_length))

        tc_tf = self.tc_filterbank.analyze(tc)
        direct = upmix_transport(tc_tf, cfg.tc_mode)
        n_slots = tc_tf.shape[1]

        if q is not None:
            psi_q, dirs_q = q.dequantize()
            self._psi[list(q.bands)] = psi_q
            self._dirs[:, list(q.bands)] = dirs_q
        psi = np.repeat(self._psi[None], n_slots, axis=0)
        dirs = np.repeat(self._dirs, SLOTS_PER_SUBFRAME, axis=0)
        smooth = cfg.coded_bands
        analysis = None
        if self.analyzer is not None:
            analysis = self.analyzer.process(direct)
            low = list(self.synthesis.low_bands)
            psi[:, low] = analysis.diffuseness[:, low]
            dirs[:, low] = analysis.direction[:, low]
        hoa_tf = self.synthesizer.process(direct, psi, dirs, smooth, SLOTS_PER_SUBFRAME)
        if q is None:
            # silence for the failed frame; synthesis state still advances
            hoa_tf = np.zeros_like(hoa_tf)
        self.last_params = DecodedParams(psi, dirs, q, analysis)
        return self.out_filterbank.synthesize(hoa_tf)


def frames_of(signal, frame_len: int):
    """Split ``(C, T)`` into zero-padded frames of ``frame_len`` samples."""
    signal = np.atleast_2d(signal)
    n = -(-signal.shape[1] // frame_len) if signal.shape[1] else 0
    padded = np.zeros((signal.shape[0], n * frame_len))
    padded[:, :signal.shape[1]] = signal
    return [padded[:, i * frame_len:(i + 1) * frame_len] for i in range(n)]


@dataclass
class EncodeStats:
    frames: int = 0
    param_bits: list[int] = field(default_factory=list)
    tc_bits: list[int] = field(default_factory=list)

    def param_bitrate(self) -> float:
        return float(np.mean(self.param_bits)) / 0.02 if self.param_bits else 0.0

    def max_param_bitrate(self) -> float:
        return max(self.param_bits) / 0.02 if self.param_bits else 0.0


def encode_signal(signal, config: CodecConfig, stats: EncodeStats | None = None) -> bytes:
    """Encode a whole ``(channels, samples)`` signal into a stream."""
    sig = signal.signals if isinstance(signal, AmbisonicFrame) else np.asarray(signal)
    enc = Encoder(config)
    frames = []
    for f in frames_of(sig, config.frame_length):
        frames.append(enc.encode_frame(f))
        if stats is not None:
            stats.frames += 1
            stats.param_bits.append(enc.last_param_bits)
            stats.tc_bits.append(enc.last_tc_bits)
    return mux(config.header(), frames)


def decode_stream(data: bytes, **kw) -> tuple[CodecConfig, np.ndarray, list[DecodeError]]:
    """Decode a whole stream; returns the config, ``(16, samples)`` PCM and frame errors."""
    header, frames = demux(data, strict=False)
    dec = Decoder.from_header(header, **kw)
    out = [dec.decode_frame(f) for f in frames]
    pcm = np.concatenate(out, axis=1) if out else np.zeros((num_channels(MAX_ORDER), 0))
    size = header.frame_size(header.samples_per_frame)
    rest = (len(data) - len(header.pack())) % size
    if rest:
        dec.errors.append(DecodeError(len(frames), f"truncated: {rest} of {size} bytes"))
    return dec.config, pcm, dec.errors
