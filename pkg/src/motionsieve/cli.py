"""Command-line front end: compress, reconstruct, stats, bench.

Error contract: every failure prints one line on stderr shaped like
``error: <Category>: <detail>`` and exits 1 for runtime errors or 2 for
argument problems.  Success prints a short human report on stdout;
machine-readable JSON goes wherever --stats-json points.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from statistics import fmean, stdev

from .errors import MotionSieveError, SidecarMismatch, ZeroInput
from .frame_io import (
    CodecDecoder,
    CodecEncoder,
    PixelFormat,
    RawReader,
    StreamHeader,
    Y4MReader,
    Y4MWriter,
    count_y4m_frames,
)
from .motion_core import MotionConfig
from .pipeline import run_pipeline
from .reconstruct import reconstruct_files
from .sidecar import SidecarWriter, read_sidecar
from .stats import (
    CompressionStats,
    pixel_change_series,
    stats_json,
    stats_table,
)

_CONFIG_KEYS = {
    "threshold",
    "downscale",
    "buffer",
    "keyframe_interval",
    "min_motion_pixels",
    "queue_capacity",
    "decode_cmd",
    "encode_cmd",
}

_DEFAULT_QUEUE_CAPACITY = 64


class _UsageError(Exception):
    """Bad arguments or config; reported with exit status 2."""


def _require_file(path: str) -> None:
    if not os.path.isfile(path):
        raise _UsageError(f"no such file: {path}")


def _to_int(name: str, value) -> int:
    if isinstance(value, int):
        return value
    try:
        return int(str(value), 10)
    except ValueError:
        raise _UsageError(f"{name} must be an integer, got {value!r}") from None


def _load_config(path: str) -> dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise _UsageError(f"cannot read config file: {exc}") from None
    values: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise _UsageError(f"{path}:{lineno}: expected key=value")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        if key not in _CONFIG_KEYS:
            raise _UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _resolve_motion(ns) -> tuple[MotionConfig, int, str | None, str | None]:
    """Merge flags over config-file values over defaults."""
    file_values = _load_config(ns.config) if getattr(ns, "config", None) else {}

    def pick(name):
        flag = getattr(ns, name, None)
        return flag if flag is not None else file_values.get(name)

    overrides = {}
    for flag_name, field in (
        ("threshold", "threshold"),
        ("downscale", "downscale"),
        ("buffer", "buffer_radius"),
        ("keyframe_interval", "keyframe_interval"),
        ("min_motion_pixels", "min_motion_pixels"),
    ):
        value = pick(flag_name)
        if value is not None:
            overrides[field] = _to_int(flag_name, value)
    try:
        config = MotionConfig(**overrides)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None

    capacity_value = pick("queue_capacity")
    queue_capacity = (
        _to_int("queue_capacity", capacity_value)
        if capacity_value is not None
        else _DEFAULT_QUEUE_CAPACITY
    )
    if queue_capacity < 1:
        raise _UsageError("queue_capacity must be >= 1")

    decode_cmd = pick("decode_cmd")
    encode_cmd = pick("encode_cmd")
    if decode_cmd is not None and "{input}" not in decode_cmd:
        raise _UsageError("decode command template must contain {input}")
    if encode_cmd is not None and "{output}" not in encode_cmd:
        raise _UsageError("encode command template must contain {output}")
    return config, queue_capacity, decode_cmd, encode_cmd


def _parse_size(text: str) -> tuple[int, int]:
    width, sep, height = text.lower().partition("x")
    if not sep:
        raise _UsageError(f"size must look like WxH, got {text!r}")
    return _to_int("size", width), _to_int("size", height)


def _parse_fps(text: str | None) -> tuple[int, int]:
    if text is None:
        return 30, 1
    num, sep, den = text.partition(":")
    if not sep:
        return _to_int("fps", num), 1
    return _to_int("fps", num), _to_int("fps", den)


def _wrap_stream(stream, ns):
    if getattr(ns, "raw_format", None):
        if not ns.size:
            raise _UsageError("--raw-format requires --size WxH")
        width, height = _parse_size(ns.size)
        fps_num, fps_den = _parse_fps(ns.fps)
        try:
            header = StreamHeader(
                width, height, fps_num, fps_den, PixelFormat(ns.raw_format)
            )
        except ValueError as exc:
            raise _UsageError(str(exc)) from None
        return RawReader(stream, header)
    return Y4MReader(stream)


def _open_compress_source(ns, decode_cmd):
    """Open the input per flags.  Returns (source, closer, bytes_in)."""
    if decode_cmd and getattr(ns, "raw_format", None):
        raise _UsageError("--raw-format cannot be combined with --decode-cmd")
    if decode_cmd:
        if ns.input == "-":
            raise _UsageError("--decode-cmd needs a real input file, not -")
        _require_file(ns.input)
        decoder = CodecDecoder(decode_cmd, ns.input)
        return decoder, decoder, os.path.getsize(ns.input)
    if ns.input == "-":
        return _wrap_stream(sys.stdin.buffer, ns), None, None
    _require_file(ns.input)
    reader = _wrap_stream(open(ns.input, "rb"), ns)
    return reader, reader, os.path.getsize(ns.input)


def _quiet_abort(sink) -> None:
    if sink is None:
        return
    try:
        abort = getattr(sink, "abort", None)
        if abort is not None:
            abort()
        else:
            sink.close()
    except Exception:
        pass


def _emit_json(text: str, dest: str) -> None:
    if dest == "-":
        sys.stdout.write(text)
    else:
        with open(dest, "w", encoding="utf-8") as handle:
            handle.write(text)


def cmd_compress(ns) -> int:
    config, queue_capacity, decode_cmd, encode_cmd = _resolve_motion(ns)
    prefix = ns.output
    video_final = prefix + (".enc" if encode_cmd else ".y4m")
    sidecar_final = prefix + ".csv"
    video_partial = video_final + ".partial"
    sidecar_partial = sidecar_final + ".partial"

    source, closer, bytes_in = _open_compress_source(ns, decode_cmd)
    video_sink = None
    sidecar_file = None
    try:
        if encode_cmd:
            video_sink = CodecEncoder(encode_cmd, video_partial, source.header)
        else:
            video_sink = Y4MWriter(open(video_partial, "wb"), source.header)
        sidecar_file = open(sidecar_partial, "w", encoding="utf-8", newline="")
        report = run_pipeline(
            source,
            config,
            video_sink,
            SidecarWriter(sidecar_file),
            queue_capacity=queue_capacity,
        )
        if closer is not None:
            closer.close()
            closer = None
        video_sink.close()
        video_sink = None
        sidecar_file.close()
        sidecar_file = None
        os.replace(video_partial, video_final)
        os.replace(sidecar_partial, sidecar_final)
    except BaseException:
        # Leave *.partial behind so a crashed run is never mistaken for a
        # complete one.
        _quiet_abort(video_sink)
        _quiet_abort(sidecar_file)
        _quiet_abort(closer)
        raise

    bytes_out = os.path.getsize(video_final) + os.path.getsize(sidecar_final)
    stats = CompressionStats(
        report.frames_in, report.frames_out, bytes_in, bytes_out
    )
    out = sys.stdout
    out.write(f"frames in:       {report.frames_in}\n")
    out.write(f"frames out:      {report.frames_out}\n")
    try:
        out.write(f"frame reduction: {stats.frame_reduction_pct:.2f}%\n")
    except ZeroInput:
        out.write("frame reduction: n/a\n")
    out.write(f"wall time:       {report.wall_time:.2f} s\n")
    out.write(f"speed:           {report.processing_speed:.1f} fps\n")
    out.write(f"video:           {video_final} ({os.path.getsize(video_final)} bytes)\n")
    out.write(f"sidecar:         {sidecar_final} ({os.path.getsize(sidecar_final)} bytes)\n")
    if stats.size_reduction_pct is not None:
        out.write(f"size reduction:  {stats.size_reduction_pct:.2f}%\n")
    if ns.stats_json:
        _emit_json(stats_json(stats), ns.stats_json)
    return 0


def cmd_reconstruct(ns) -> int:
    decode_cmd = ns.decode_cmd
    if decode_cmd is not None and "{input}" not in decode_cmd:
        raise _UsageError("decode command template must contain {input}")
    _require_file(ns.input)
    _require_file(ns.sidecar)
    with open(ns.sidecar, "r", encoding="utf-8", newline="") as handle:
        records = read_sidecar(handle)
    if decode_cmd:
        source = CodecDecoder(decode_cmd, ns.input)
    else:
        source = Y4MReader(open(ns.input, "rb"))
    try:
        paths = reconstruct_files(source, source.header, records, ns.output)
        source.close()
    except BaseException:
        _quiet_abort(source)
        raise
    for path in paths:
        sys.stdout.write(f"{path}\n")
    return 0


def cmd_stats(ns) -> int:
    if ns.pixel_change:
        if not ns.input:
            raise _UsageError("--pixel-change requires --input")
        _require_file(ns.input)
        threshold = ns.threshold if ns.threshold is not None else 25
        if not 0 <= threshold <= 255:
            raise _UsageError("threshold must be in [0, 255]")
        with open(ns.input, "rb") as handle:
            series = pixel_change_series(iter(Y4MReader(handle)), threshold)
        table = (
            f"pixel change mean    {series.mean:.2f}%\n"
            f"pixel change median  {series.median:.2f}%\n"
        )
        payload = json.dumps(
            {
                "pixel_change_pct": {
                    "mean": series.mean,
                    "median": series.median,
                    "per_frame": series.per_frame,
                }
            },
            indent=2,
        ) + "\n"
        _emit_stats_outputs(table, payload, ns.stats_json)
        return 0

    if ns.frames_in is not None or ns.frames_out is not None:
        if ns.frames_in is None or ns.frames_out is None:
            raise _UsageError("counts mode needs both --frames-in and --frames-out")
        if (ns.bytes_in is None) != (ns.bytes_out is None):
            raise _UsageError("--bytes-in and --bytes-out must be given together")
        if ns.frames_out < 0 or ns.frames_out > ns.frames_in:
            raise _UsageError("--frames-out must be in [0, --frames-in]")
        stats = CompressionStats(
            ns.frames_in, ns.frames_out, ns.bytes_in, ns.bytes_out
        )
    elif ns.raw or ns.processed:
        if not (ns.raw and ns.processed):
            raise _UsageError("file mode needs both --raw and --processed")
        _require_file(ns.raw)
        _require_file(ns.processed)
        frames_in = count_y4m_frames(ns.raw)
        frames_out = count_y4m_frames(ns.processed)
        bytes_in = os.path.getsize(ns.raw)
        bytes_out = os.path.getsize(ns.processed)
        if ns.sidecar:
            _require_file(ns.sidecar)
            bytes_out += os.path.getsize(ns.sidecar)
            with open(ns.sidecar, "r", encoding="utf-8", newline="") as handle:
                rows = len(read_sidecar(handle))
            if rows != frames_out:
                raise SidecarMismatch(
                    f"sidecar has {rows} rows, video has {frames_out} frames"
                )
        stats = CompressionStats(frames_in, frames_out, bytes_in, bytes_out)
    else:
        raise _UsageError(
            "select a mode: --frames-in/--frames-out, --raw/--processed, "
            "or --pixel-change"
        )

    _emit_stats_outputs(stats_table(stats), stats_json(stats), ns.stats_json)
    return 0


def _emit_stats_outputs(table: str, payload: str, dest: str | None) -> None:
    if dest is None:
        sys.stdout.write(table)
        sys.stdout.write("\n")
        sys.stdout.write(payload)
    elif dest == "-":
        sys.stdout.write(payload)
    else:
        _emit_json(payload, dest)
        sys.stdout.write(table)


def cmd_bench(ns) -> int:
    config, queue_capacity, decode_cmd, encode_cmd = _resolve_motion(ns)
    if ns.replicates < 1:
        raise _UsageError("replicates must be >= 1")
    if ns.input == "-":
        raise _UsageError("bench needs a re-readable input file, not -")
    _require_file(ns.input)

    reports = []
    with tempfile.TemporaryDirectory(prefix="motionsieve-bench-") as tmp:
        for index in range(ns.replicates):
            source, closer, _ = _open_compress_source(ns, decode_cmd)
            prefix = os.path.join(tmp, f"replicate{index}")
            video_sink = None
            sidecar_file = None
            try:
                if encode_cmd:
                    video_sink = CodecEncoder(
                        encode_cmd, prefix + ".enc", source.header
                    )
                else:
                    video_sink = Y4MWriter(
                        open(prefix + ".y4m", "wb"), source.header
                    )
                sidecar_file = open(
                    prefix + ".csv", "w", encoding="utf-8", newline=""
                )
                report = run_pipeline(
                    source,
                    config,
                    video_sink,
                    SidecarWriter(sidecar_file),
                    queue_capacity=queue_capacity,
                )
                if closer is not None:
                    closer.close()
                    closer = None
                video_sink.close()
                video_sink = None
                sidecar_file.close()
                sidecar_file = None
            except BaseException:
                _quiet_abort(video_sink)
                _quiet_abort(sidecar_file)
                _quiet_abort(closer)
                raise
            reports.append(report)
            sys.stdout.write(
                f"replicate {index + 1}: {report.wall_time:.2f} s "
                f"({report.processing_speed:.1f} fps)\n"
            )

    times = [report.wall_time for report in reports]
    mean_time = fmean(times)
    sd_time = stdev(times) if len(times) > 1 else 0.0
    frames = reports[0].frames_in
    fps = frames / mean_time
    sys.stdout.write(
        f"time:  {mean_time:.2f} +/- {sd_time:.2f} s "
        f"over {ns.replicates} replicates\n"
    )
    sys.stdout.write(f"speed: {fps:.1f} fps ({frames} frames)\n")
    if ns.stats_json:
        payload = json.dumps(
            {
                "replicates": ns.replicates,
                "times_sec": times,
                "mean_sec": mean_time,
                "sd_sec": sd_time,
                "frames": frames,
                "fps": fps,
            },
            indent=2,
        ) + "\n"
        _emit_json(payload, ns.stats_json)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motionsieve",
        description=(
            "Motion-gated video compression with sidecar-indexed "
            "reconstruction"
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    motion = argparse.ArgumentParser(add_help=False)
    group = motion.add_argument_group("motion analysis")
    group.add_argument(
        "--threshold", type=int,
        help="luma difference threshold, strict, 1-255 (default 25)",
    )
    group.add_argument(
        "--downscale", type=int,
        help="analysis grid block edge; 1 disables (default 2)",
    )
    group.add_argument(
        "--buffer", type=int,
        help="mask dilation radius in grid cells (default 5)",
    )
    group.add_argument(
        "--keyframe-interval", type=int,
        help="full-frame cadence inside a motion run (default 100)",
    )
    group.add_argument(
        "--min-motion-pixels", type=int,
        help="minimum mask population to keep a frame (default 10)",
    )
    group.add_argument(
        "--queue-capacity", type=int,
        help="pipeline stage queue depth (default 64)",
    )
    group.add_argument(
        "--config",
        help="key=value file mirroring these flags; explicit flags win",
    )

    raw_input = argparse.ArgumentParser(add_help=False)
    raw_input.add_argument(
        "--raw-format", choices=[pf.value for pf in PixelFormat],
        help="treat input as headerless planar frames of this layout",
    )
    raw_input.add_argument("--size", help="WxH, required with --raw-format")
    raw_input.add_argument(
        "--fps", help="frame rate N or N:D for raw input (default 30)"
    )

    compress = commands.add_parser(
        "compress", parents=[motion, raw_input],
        help="drop still frames, mask moving ones",
    )
    compress.add_argument(
        "--input", required=True,
        help="Y4M file, - for stdin, or compressed file with --decode-cmd",
    )
    compress.add_argument(
        "--output", required=True,
        help="output prefix; writes <prefix>.y4m (or .enc) and <prefix>.csv",
    )
    compress.add_argument(
        "--decode-cmd",
        help="decode command template with {input}, emitting Y4M on stdout",
    )
    compress.add_argument(
        "--encode-cmd",
        help="encode command template with {output}, reading Y4M on stdin",
    )
    compress.add_argument(
        "--stats-json", help="write run stats JSON here (- for stdout)"
    )
    compress.set_defaults(func=cmd_compress)

    reconstruct = commands.add_parser(
        "reconstruct",
        help="rebuild playback streams from compressed video + sidecar",
    )
    reconstruct.add_argument("--input", required=True)
    reconstruct.add_argument("--sidecar", required=True)
    reconstruct.add_argument(
        "--output", required=True,
        help="output prefix; writes .dl.y4m, .fgbg.y4m, .align.csv",
    )
    reconstruct.add_argument(
        "--decode-cmd",
        help="decode command template with {input}, emitting Y4M on stdout",
    )
    reconstruct.set_defaults(func=cmd_reconstruct)

    stats = commands.add_parser(
        "stats", help="reduction percentages and pixel-change statistics"
    )
    stats.add_argument("--frames-in", type=int)
    stats.add_argument("--frames-out", type=int)
    stats.add_argument("--bytes-in", type=float)
    stats.add_argument("--bytes-out", type=float)
    stats.add_argument("--raw", help="original video (Y4M) for file mode")
    stats.add_argument("--processed", help="compressed video (Y4M) for file mode")
    stats.add_argument("--sidecar", help="sidecar CSV, counted into bytes out")
    stats.add_argument(
        "--pixel-change", action="store_true",
        help="per-frame changed-pixel percentages for --input",
    )
    stats.add_argument("--input", help="video for --pixel-change")
    stats.add_argument(
        "--threshold", type=int,
        help="pixel-change threshold, 0-255 (default 25)",
    )
    stats.add_argument(
        "--stats-json", help="write JSON here (- for stdout only)"
    )
    stats.set_defaults(func=cmd_stats)

    bench = commands.add_parser(
        "bench", parents=[motion, raw_input],
        help="time repeated compression runs of one input",
    )
    bench.add_argument("--input", required=True)
    bench.add_argument(
        "--replicates", type=int, default=3,
        help="number of timed runs (default 3)",
    )
    bench.add_argument(
        "--decode-cmd",
        help="decode command template with {input}, emitting Y4M on stdout",
    )
    bench.add_argument(
        "--encode-cmd",
        help="encode command template with {output}, reading Y4M on stdin",
    )
    bench.add_argument(
        "--stats-json", help="write timing JSON here (- for stdout)"
    )
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except _UsageError as exc:
        print(f"error: InvalidArgument: {exc}", file=sys.stderr)
        return 2
    except MotionSieveError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: IO: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
