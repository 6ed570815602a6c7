"""Command-line front end: ``fodirac encode|decode|inspect|eval``.

Exit codes: 0 success, 2 bad input or configuration, 3 stream parse failure.
Statistics are printed as ``key=value`` lines.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .ambisonics import Direction, TcMode
from .bitstream import BitstreamError, StreamHeader, demux
from .codec import SUPPORTED_BITRATES, CodecConfig, ConfigError, Decoder, EncodeStats, decode_stream, encode_signal
from .evaluation import (
    REPORT_FIELDS, SWEEP_FIELDS, SceneSpec, codec_metrics, doa_error_vs_diffuseness, gen_scene,
    plane_wave_scene, rows_to_csv,
)
from .wavio import WavError, read_ambix, write_ambix

EXIT_OK, EXIT_USAGE, EXIT_STREAM = 0, 2, 3


def _print_kv(out, **kw):
    for k, v in kw.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        print(f"{k}={v}", file=out)


def _bitrate(text: str) -> int:
    t = text.lower().strip()
    scale = 1000 if t.endswith("k") else 1
    try:
        return int(float(t.rstrip("k")) * scale)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bitrate {text!r}") from None


def _tc_mode(text: str):
    if text == "auto":
        return None
    if text not in ("1", "2", "4"):
        raise argparse.ArgumentTypeError("tc mode must be auto, 1, 2 or 4")
    return TcMode(int(text))


def cmd_encode(args, out) -> int:
    try:
        frame = read_ambix(args.input)
        cfg = CodecConfig(args.bitrate, frame.sample_rate, args.tc_mode, args.transport, frame.order)
    except (WavError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    stats = EncodeStats()
    data = encode_signal(frame.signals, cfg, stats)
    Path(args.output).write_bytes(data)
    mean_param = float(np.mean(stats.param_bits)) if stats.param_bits else 0.0
    _print_kv(
        out, frames=stats.frames, bitrate=cfg.bitrate, tc_mode=int(cfg.tc_mode), bands=cfg.n_bands,
        transport=cfg.transport, frame_bytes=cfg.header().frame_size(cfg.frame_length),
        param_cap_bps=cfg.cap_bits / 0.02, param_bitrate_bps=stats.param_bitrate(),
        param_bitrate_max_bps=stats.max_param_bitrate(), tc_budget_bits=cfg.frame_bits - mean_param,
        bytes=len(data),
    )
    return EXIT_OK


def cmd_decode(args, out) -> int:
    try:
        data = Path(args.input).read_bytes()
        cfg, pcm, errors = decode_stream(data)
    except (OSError, BitstreamError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STREAM
    write_ambix(args.output, pcm, cfg.sample_rate)
    _print_kv(out, frames=pcm.shape[1] // cfg.frame_length, channels=pcm.shape[0],
              sample_rate=cfg.sample_rate, latency_samples=Decoder(cfg).latency, errors=len(errors))
    for e in errors:
        print(f"error: frame {e.frame_index}: {e.message}", file=sys.stderr)
    return EXIT_STREAM if errors else EXIT_OK


def cmd_inspect(args, out) -> int:
    try:
        data = Path(args.input).read_bytes()
        header = StreamHeader.unpack(data)
    except (OSError, BitstreamError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STREAM
    cfg = CodecConfig.from_header(header)
    _print_kv(out, version=header.version, sample_rate=header.sample_rate, bitrate=header.bitrate,
              tc_mode=header.n_tc, input_order=header.input_order, bands=header.n_bands,
              transport=header.transport, frame_bytes=header.frame_size(header.samples_per_frame),
              param_cap_bits=cfg.cap_bits)
    _, frames = demux(data, strict=False)
    dec = Decoder(cfg)
    limit = len(frames) if args.frames is None else min(args.frames, len(frames))
    for i in range(limit):
        try:
            q, _ = dec.parse_frame(frames[i])
        except BitstreamError as e:
            print(f"error: frame {i}: {e}", file=sys.stderr)
            return EXIT_STREAM
        psi, dirs = q.dequantize()
        for j, b in enumerate(q.bands):
            doas = " ".join(
                "{:.1f}/{:.1f}".format(*Direction.from_vector(v).degrees()) for v in dirs[:, j]
            )
            print(f"frame={i} band={b} psi={psi[j]:.3f} bits={int(q.doa_width[j])} doa={doas}", file=out)
    size = header.frame_size(header.samples_per_frame)
    rest = (len(data) - len(header.pack())) % size
    if rest and limit == len(frames):
        print(f"error: frame {len(frames)}: truncated, {rest} of {size} bytes", file=sys.stderr)
        return EXIT_STREAM
    return EXIT_OK


def _scene_spec(args) -> SceneSpec:
    d = Direction.from_degrees(args.azimuth, args.elevation)
    if args.scene == "isotropic":
        return SceneSpec([], 1.0, args.duration, args.sample_rate, args.seed)
    psi = 0.0 if args.scene == "plane" else args.diffuse
    return plane_wave_scene(d, psi, args.duration, args.sample_rate, args.seed)


def cmd_eval(args, out) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    from .plotting import plot_metrics, plot_sweep

    if args.sweep:
        rows = doa_error_vs_diffuseness(args.ratios, args.duration, args.repeats, sample_rate=args.sample_rate,
                                        seed=args.seed)
        (outdir / "sweep.csv").write_text(rows_to_csv(rows, SWEEP_FIELDS))
        plot_sweep(rows, outdir / "sweep.png")
        print(rows_to_csv(rows, SWEEP_FIELDS), end="", file=out)
    if args.scene:
        try:
            cfg = CodecConfig(args.config, args.sample_rate, args.tc_mode, "passthrough",
                              compensation=args.compensation)
        except ConfigError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
        scene = gen_scene(_scene_spec(args), bands=cfg.bands)
        report = codec_metrics(scene, cfg)
        name = f"metrics_{args.scene}_{cfg.bitrate // 1000}k"
        (outdir / f"{name}.csv").write_text(rows_to_csv(report.rows(), REPORT_FIELDS))
        plot_metrics(report, outdir / f"{name}.png")
        print(rows_to_csv(report.rows(), REPORT_FIELDS), end="", file=out)
    if not args.sweep and not args.scene:
        print("error: eval needs --sweep and/or --scene", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fodirac", description="Parametric first-order DirAC ambisonics codec.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="encode an AmbiX WAV to a .adc stream")
    e.add_argument("input")
    e.add_argument("output")
    e.add_argument("--bitrate", type=_bitrate, required=True,
                   help="bps, one of " + ", ".join(str(b) for b in SUPPORTED_BITRATES))
    e.add_argument("--tc-mode", type=_tc_mode, default=None, metavar="auto|1|2|4")
    e.add_argument("--transport", choices=("passthrough", "scalarq"), default="scalarq")
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="decode a .adc stream to a 16-channel AmbiX WAV")
    d.add_argument("input")
    d.add_argument("output")
    d.set_defaults(func=cmd_decode)

    i = sub.add_parser("inspect", help="dump header and per-frame parameters")
    i.add_argument("input")
    i.add_argument("--frames", type=int, default=None, help="dump at most this many frames")
    i.set_defaults(func=cmd_inspect)

    v = sub.add_parser("eval", help="synthetic-scene metrics as CSV plus PNG figures")
    v.add_argument("--sweep", action="store_true", help="DOA error vs diffuseness sweep")
    v.add_argument("--ratios", type=float, nargs="*", default=[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    v.add_argument("--repeats", type=int, default=2)
    v.add_argument("--scene", choices=("plane", "mix", "isotropic"), default=None)
    v.add_argument("--config", type=_bitrate, default=64000, help="codec bitrate for --scene")
    v.add_argument("--tc-mode", type=_tc_mode, default=None, metavar="auto|1|2|4")
    v.add_argument("--compensation", choices=("balanced", "decreasing"), default="balanced")
    v.add_argument("--diffuse", type=float, default=0.3, help="diffuse power fraction of the mix scene")
    v.add_argument("--azimuth", type=float, default=30.0)
    v.add_argument("--elevation", type=float, default=10.0)
    v.add_argument("--duration", type=float, default=1.0)
    v.add_argument("--sample-rate", type=int, default=48000, choices=(32000, 48000))
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default="eval_out", help="directory for CSV and PNG files")
    v.set_defaults(func=cmd_eval)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    return args.func(args, out)


if __name__ == "__main__":
    sys.exit(main())
