"""Reading and writing uncompressed video streams.

The interchange carrier is YUV4MPEG2 ("Y4M"): one ASCII header line
(``YUV4MPEG2 W<width> H<height> F<num>:<den> C<colorspace> ...``) followed
by frames, each introduced by a ``FRAME`` marker line and carrying a
fixed-size raw payload.  Unknown header tags are preserved verbatim so a
parse/serialize round trip does not lose information.  Three pixel layouts
are supported:

* ``GRAY8``  -- single luma plane, ``w*h`` bytes per frame (``Cmono``)
* ``RGB24``  -- planar R, G, B, ``3*w*h`` bytes per frame.  Carried under
  the ``C444`` tag with planes read in R, G, B order; Y4M has no RGB tag,
  so this is a local convention, not an interchange guarantee.
* ``YUV420`` -- planar Y, U, V with 2x2-subsampled chroma, ``w*h*3/2``
  bytes per frame (``C420`` family); width and height must be even

Raw planar files (no header, concatenated payloads) cover fixtures where
exact bytes matter.  Compressed containers are never parsed here; they are
delegated to an external codec command via :class:`CodecDecoder` and
:class:`CodecEncoder`, where the child process speaks Y4M on its standard
streams and ``{input}`` / ``{output}`` placeholders in the command template
name the compressed file.
"""

from __future__ import annotations

import shlex
import subprocess
import threading
from dataclasses import dataclass
from enum import Enum
from typing import BinaryIO, Iterator

from .errors import (
    BrokenPipe,
    DimensionMismatch,
    MalformedFrameMarker,
    MalformedHeader,
    MotionSieveError,
    NonZeroExit,
    SinkUnavailable,
    SpawnFailure,
    TruncatedFrame,
    UnsupportedColorspace,
)

_MAX_LINE = 4096
_STDERR_TAIL = 8192


class PixelFormat(Enum):
    GRAY8 = "gray8"
    RGB24 = "rgb24"
    YUV420 = "yuv420"

    def frame_size(self, width: int, height: int) -> int:
        """Payload size in bytes for one frame at the given dimensions."""
        if self is PixelFormat.GRAY8:
            return width * height
        if self is PixelFormat.RGB24:
            return 3 * width * height
        return width * height * 3 // 2


_COLORSPACE_TO_FORMAT = {
    "mono": PixelFormat.GRAY8,
    "420": PixelFormat.YUV420,
    "420jpeg": PixelFormat.YUV420,
    "420mpeg2": PixelFormat.YUV420,
    "420paldv": PixelFormat.YUV420,
    "444": PixelFormat.RGB24,
}

_FORMAT_TO_COLORSPACE = {
    PixelFormat.GRAY8: "mono",
    PixelFormat.YUV420: "420",
    PixelFormat.RGB24: "444",
}


@dataclass(frozen=True)
class StreamHeader:
    """Per-stream metadata: dimensions, frame rate, pixel layout, extra tags.

    ``extra_tags`` holds unrecognized Y4M tokens (interlacing, aspect,
    ``X`` extensions) verbatim, in their original order.
    """

    width: int
    height: int
    fps_num: int = 30
    fps_den: int = 1
    pixel_format: PixelFormat = PixelFormat.YUV420
    extra_tags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("frame dimensions must be positive")
        if self.fps_num < 1 or self.fps_den < 1:
            raise ValueError("frame rate must be positive")
        if self.pixel_format is PixelFormat.YUV420 and (
            self.width % 2 or self.height % 2
        ):
            raise ValueError("yuv420 requires even width and height")

    @property
    def fps(self) -> float:
        return self.fps_num / self.fps_den

    def frame_size(self) -> int:
        return self.pixel_format.frame_size(self.width, self.height)


@dataclass(frozen=True)
class Frame:
    """One video frame: position in the input stream plus raw planar bytes."""

    index: int
    width: int
    height: int
    pixel_format: PixelFormat
    data: bytes

    def __post_init__(self) -> None:
        if self.pixel_format is PixelFormat.YUV420 and (
            self.width % 2 or self.height % 2
        ):
            raise ValueError("yuv420 requires even width and height")
        expected = self.pixel_format.frame_size(self.width, self.height)
        if len(self.data) != expected:
            raise ValueError(
                f"payload is {len(self.data)} bytes, expected {expected}"
            )


def parse_y4m_header(stream: BinaryIO) -> StreamHeader:
    """Read and decode the Y4M signature line from ``stream``.

    Raises MalformedHeader when the signature or a required tag is missing
    or undecodable, UnsupportedColorspace for C tags outside the supported
    families.  A missing F tag defaults to 30:1, a missing C tag to the
    conventional 4:2:0.
    """
    line = stream.readline(_MAX_LINE)
    tokens = line.decode("ascii", "replace").rstrip("\n").split(" ")
    if tokens[0] != "YUV4MPEG2" or len(tokens) < 2:
        raise MalformedHeader("missing YUV4MPEG2 signature")

    width = height = None
    fps_num, fps_den = 30, 1
    colorspace = None
    extras: list[str] = []
    for token in tokens[1:]:
        if not token:
            continue
        key, value = token[0], token[1:]
        if key == "W":
            width = _parse_positive(value, "W")
        elif key == "H":
            height = _parse_positive(value, "H")
        elif key == "F":
            num, sep, den = value.partition(":")
            if not sep:
                raise MalformedHeader(f"bad F tag {token!r}")
            fps_num = _parse_positive(num, "F")
            fps_den = _parse_positive(den, "F")
        elif key == "C":
            colorspace = value
        else:
            extras.append(token)

    if width is None:
        raise MalformedHeader("missing W tag")
    if height is None:
        raise MalformedHeader("missing H tag")
    if colorspace is None:
        pixel_format = PixelFormat.YUV420
    else:
        try:
            pixel_format = _COLORSPACE_TO_FORMAT[colorspace]
        except KeyError:
            raise UnsupportedColorspace(f"C{colorspace}") from None
    try:
        return StreamHeader(
            width, height, fps_num, fps_den, pixel_format, tuple(extras)
        )
    except ValueError as exc:
        raise MalformedHeader(str(exc)) from None


def _parse_positive(text: str, tag: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise MalformedHeader(f"bad {tag} tag value {text!r}") from None
    if value < 1:
        raise MalformedHeader(f"bad {tag} tag value {text!r}")
    return value


def serialize_y4m_header(header: StreamHeader) -> bytes:
    tokens = [
        "YUV4MPEG2",
        f"W{header.width}",
        f"H{header.height}",
        f"F{header.fps_num}:{header.fps_den}",
        f"C{_FORMAT_TO_COLORSPACE[header.pixel_format]}",
        *header.extra_tags,
    ]
    return (" ".join(tokens) + "\n").encode("ascii")


def _read_exact(stream: BinaryIO, size: int) -> bytes:
    chunks = []
    remaining = size
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class Y4MReader:
    """Sequential frame reader over a binary Y4M stream.

    The header is parsed eagerly at construction; frames are then yielded
    in order with 0-based ``index`` assigned by read position.
    """

    def __init__(self, stream: BinaryIO):
        self._stream = stream
        self.header = parse_y4m_header(stream)
        self._next_index = 0

    def read(self) -> Frame | None:
        """Next frame, or None at end of stream."""
        line = self._stream.readline(_MAX_LINE)
        if line == b"":
            return None
        if not line.endswith(b"\n") or not _is_frame_marker(line):
            raise MalformedFrameMarker(f"expected FRAME marker, got {line[:40]!r}")
        size = self.header.frame_size()
        data = _read_exact(self._stream, size)
        if len(data) != size:
            raise TruncatedFrame(f"frame payload is {len(data)} of {size} bytes")
        frame = Frame(
            self._next_index,
            self.header.width,
            self.header.height,
            self.header.pixel_format,
            data,
        )
        self._next_index += 1
        return frame

    def __iter__(self) -> Iterator[Frame]:
        while (frame := self.read()) is not None:
            yield frame

    def close(self) -> None:
        self._stream.close()

    def __enter__(self) -> "Y4MReader":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def _is_frame_marker(line: bytes) -> bool:
    # Frame markers may carry their own parameters: "FRAME Ixyz\n".
    return line.startswith(b"FRAME") and line[5:6] in (b"\n", b" ")


class Y4MWriter:
    """Frame sink serializing to Y4M.  The header line is written eagerly,
    so an empty stream still yields a well-formed file."""

    def __init__(self, stream: BinaryIO, header: StreamHeader):
        self._stream = stream
        self.header = header
        self._write(serialize_y4m_header(header))

    def write_frame(self, frame: Frame) -> None:
        _check_frame_shape(self.header, frame)
        self._write(b"FRAME\n")
        self._write(frame.data)

    def _write(self, data: bytes) -> None:
        try:
            self._stream.write(data)
        except BrokenPipeError:
            raise
        except (OSError, ValueError) as exc:
            raise SinkUnavailable(str(exc)) from exc

    def flush(self) -> None:
        try:
            self._stream.flush()
        except (OSError, ValueError) as exc:
            raise SinkUnavailable(str(exc)) from exc

    def close(self) -> None:
        self.flush()
        self._stream.close()

    def __enter__(self) -> "Y4MWriter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def _check_frame_shape(header: StreamHeader, frame: Frame) -> None:
    if (frame.width, frame.height, frame.pixel_format) != (
        header.width,
        header.height,
        header.pixel_format,
    ):
        raise DimensionMismatch(
            f"frame is {frame.width}x{frame.height} {frame.pixel_format.value}, "
            f"stream is {header.width}x{header.height} {header.pixel_format.value}"
        )


class RawReader:
    """Reader for headerless files of concatenated frame payloads.

    The caller supplies the header; payload size and framing follow from it.
    """

    def __init__(self, stream: BinaryIO, header: StreamHeader):
        self._stream = stream
        self.header = header
        self._next_index = 0

    def read(self) -> Frame | None:
        size = self.header.frame_size()
        data = _read_exact(self._stream, size)
        if not data:
            return None
        if len(data) != size:
            raise TruncatedFrame(f"frame payload is {len(data)} of {size} bytes")
        frame = Frame(
            self._next_index,
            self.header.width,
            self.header.height,
            self.header.pixel_format,
            data,
        )
        self._next_index += 1
        return frame

    def __iter__(self) -> Iterator[Frame]:
        while (frame := self.read()) is not None:
            yield frame

    def close(self) -> None:
        self._stream.close()


class RawWriter:
    """Counterpart of RawReader: writes bare payloads, no markers."""

    def __init__(self, stream: BinaryIO, header: StreamHeader):
        self._stream = stream
        self.header = header

    def write_frame(self, frame: Frame) -> None:
        _check_frame_shape(self.header, frame)
        try:
            self._stream.write(frame.data)
        except (OSError, ValueError) as exc:
            raise SinkUnavailable(str(exc)) from exc

    def close(self) -> None:
        self._stream.close()


def count_y4m_frames(path) -> int:
    """Number of frames in a Y4M file, skipping payloads by seeking."""
    with open(path, "rb") as stream:
        total = stream.seek(0, 2)
        stream.seek(0)
        header = parse_y4m_header(stream)
        size = header.frame_size()
        count = 0
        while True:
            line = stream.readline(_MAX_LINE)
            if line == b"":
                return count
            if not line.endswith(b"\n") or not _is_frame_marker(line):
                raise MalformedFrameMarker(
                    f"expected FRAME marker, got {line[:40]!r}"
                )
            if stream.seek(size, 1) > total:
                raise TruncatedFrame("last frame payload is short")
            count += 1


class _StderrDrain(threading.Thread):
    """Drains a child's stderr so it can never block, keeping the tail."""

    def __init__(self, pipe):
        super().__init__(daemon=True)
        self._pipe = pipe
        self._tail = b""
        self.start()

    def run(self) -> None:
        while True:
            chunk = self._pipe.read(4096)
            if not chunk:
                return
            self._tail = (self._tail + chunk)[-_STDERR_TAIL:]

    def text(self) -> str:
        self.join(timeout=5.0)
        return self._tail.decode("utf-8", "replace").strip()


def _render_template(template: str, placeholder: str, value: str) -> list[str]:
    """Split a command template and substitute the file placeholder."""
    if placeholder not in template:
        raise ValueError(f"codec command template must contain {placeholder}")
    return [token.replace(placeholder, value) for token in shlex.split(template)]


class CodecDecoder:
    """Frame source backed by an external decode command.

    The command template names the compressed file via ``{input}`` and must
    emit Y4M on stdout.  The child's exit status is checked in close(); a
    nonzero status raises NonZeroExit carrying the stderr tail.
    """

    def __init__(self, template: str, input_path):
        argv = _render_template(template, "{input}", str(input_path))
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.DEVNULL,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
            )
        except OSError as exc:
            raise SpawnFailure(f"cannot run {argv[0]!r}: {exc}") from exc
        self._stderr = _StderrDrain(self._proc.stderr)
        try:
            self._reader = Y4MReader(self._proc.stdout)
        except MotionSieveError as exc:
            # The stream never started; the child's own failure is the
            # better diagnostic when it exited nonzero.
            rc = self._reap()
            if rc != 0:
                raise NonZeroExit(self._describe(rc)) from exc
            raise
        self.header = self._reader.header

    def read(self) -> Frame | None:
        return self._reader.read()

    def __iter__(self) -> Iterator[Frame]:
        return iter(self._reader)

    def close(self) -> None:
        """Release the child and surface its exit status."""
        rc = self._reap()
        if rc != 0:
            raise NonZeroExit(self._describe(rc))

    def abort(self) -> None:
        """Kill the child without caring about its status."""
        self._proc.kill()
        self._reap()

    def _reap(self) -> int:
        try:
            self._proc.stdout.close()
        except OSError:
            pass
        rc = self._proc.wait()
        self._stderr.join(timeout=5.0)
        return rc

    def _describe(self, rc: int) -> str:
        detail = self._stderr.text()
        message = f"decode command exited with status {rc}"
        return f"{message}: {detail}" if detail else message

    def __enter__(self) -> "CodecDecoder":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            self.abort()


class CodecEncoder:
    """Frame sink backed by an external encode command.

    The command template names the compressed output file via ``{output}``
    and must read Y4M from stdin.  An encoder that stops reading raises
    BrokenPipe (or NonZeroExit when it already failed); close() waits for
    the child and checks its status.
    """

    def __init__(self, template: str, output_path, header: StreamHeader):
        argv = _render_template(template, "{output}", str(output_path))
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.DEVNULL,
                stderr=subprocess.PIPE,
            )
        except OSError as exc:
            raise SpawnFailure(f"cannot run {argv[0]!r}: {exc}") from exc
        self._stderr = _StderrDrain(self._proc.stderr)
        self.header = header
        self._send(serialize_y4m_header(header))

    def write_frame(self, frame: Frame) -> None:
        _check_frame_shape(self.header, frame)
        self._send(b"FRAME\n")
        self._send(frame.data)

    def _send(self, data: bytes) -> None:
        try:
            self._proc.stdin.write(data)
        except BrokenPipeError as exc:
            rc = self._reap()
            if rc != 0:
                raise NonZeroExit(self._describe(rc)) from exc
            raise BrokenPipe("encode command closed its input early") from exc

    def close(self) -> None:
        rc = self._reap()
        if rc != 0:
            raise NonZeroExit(self._describe(rc))

    def abort(self) -> None:
        self._proc.kill()
        self._reap()

    def _reap(self) -> int:
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        rc = self._proc.wait()
        self._stderr.join(timeout=5.0)
        return rc

    def _describe(self, rc: int) -> str:
        detail = self._stderr.text()
        message = f"encode command exited with status {rc}"
        return f"{message}: {detail}" if detail else message

    def __enter__(self) -> "CodecEncoder":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            self.abort()
