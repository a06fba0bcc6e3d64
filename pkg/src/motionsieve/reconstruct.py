"""Rebuild full-frame streams from a compressed video plus its sidecar.

Playback of a compressed recording must serve two consumers: detectors
that want the original color frames as stored, and background-subtraction
detectors that want every frame against a stable background.  The first
stream is a pass-through.  The second is rebuilt in grayscale from the
most recent full frame: the environment outside the motion region is
recovered as the absolute difference between reference and motion frame,
then the motion content is added back with saturation at 255.

Where the motion frame is zero (everything the mask removed), the rebuilt
pixel equals the reference exactly; inside the kept region it equals the
reference wherever the scene did not actually change.  The rebuilt frame
is never darker than the motion frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import DimensionMismatch, MissingReference, SidecarMismatch
from .frame_io import Frame, PixelFormat, StreamHeader, Y4MWriter
from .motion_core import to_grayscale
from .sidecar import SidecarRecord


def env_frame(ref: np.ndarray, mot: np.ndarray) -> np.ndarray:
    """Environment estimate |ref - mot| for equal-shape uint8 gray frames."""
    if ref.shape != mot.shape:
        raise DimensionMismatch(f"gray shapes differ: {ref.shape} vs {mot.shape}")
    return np.abs(ref.astype(np.int16) - mot.astype(np.int16)).astype(np.uint8)


def rec_frame(env: np.ndarray, mot: np.ndarray) -> np.ndarray:
    """Saturating sum env + mot, capped at 255."""
    if env.shape != mot.shape:
        raise DimensionMismatch(f"gray shapes differ: {env.shape} vs {mot.shape}")
    total = env.astype(np.uint16) + mot.astype(np.uint16)
    return np.minimum(total, 255).astype(np.uint8)


@dataclass
class ReferenceStore:
    """Most recent full frame, held as grayscale, with its source index."""

    gray: np.ndarray
    input_index: int


@dataclass(frozen=True, eq=False)
class RebuiltFrame:
    """One reconstructed position: the stored color frame untouched, and
    the grayscale frame with the environment filled back in."""

    input_index: int
    is_full: bool
    color: Frame
    restored: np.ndarray


def reconstruct_stream(
    frames: Iterable[Frame], records: Iterable[SidecarRecord]
) -> Iterator[RebuiltFrame]:
    """Pair compressed frames with sidecar rows and rebuild each position.

    Raises SidecarMismatch when the counts disagree and MissingReference
    when a masked frame arrives before any full frame.  Errors surface
    while iterating, since both inputs may be streams.
    """
    record_iter = iter(records)
    reference: ReferenceStore | None = None
    for frame in frames:
        record = next(record_iter, None)
        if record is None:
            raise SidecarMismatch("video has more frames than sidecar rows")
        gray = to_grayscale(frame)
        if record.full_frame:
            reference = ReferenceStore(gray, record.input_frame)
            restored = gray
        else:
            if reference is None:
                raise MissingReference(
                    f"row for input frame {record.input_frame} is masked "
                    "but no full frame precedes it"
                )
            restored = rec_frame(env_frame(reference.gray, gray), gray)
        yield RebuiltFrame(record.input_frame, record.full_frame, frame, restored)
    if next(record_iter, None) is not None:
        raise SidecarMismatch("sidecar has more rows than video frames")


def reconstruct_files(
    frames: Iterable[Frame],
    header: StreamHeader,
    records: Iterable[SidecarRecord],
    out_prefix: str,
) -> tuple[str, str, str]:
    """Write both playback streams plus the alignment table.

    Produces ``<prefix>.dl.y4m`` (color pass-through, original header),
    ``<prefix>.fgbg.y4m`` (rebuilt grayscale), and ``<prefix>.align.csv``
    mapping output position to source frame index.  Returns the three
    paths.
    """
    dl_path = out_prefix + ".dl.y4m"
    fgbg_path = out_prefix + ".fgbg.y4m"
    align_path = out_prefix + ".align.csv"
    mono_header = StreamHeader(
        header.width,
        header.height,
        header.fps_num,
        header.fps_den,
        PixelFormat.GRAY8,
    )
    with open(dl_path, "wb") as dl_file, open(fgbg_path, "wb") as fgbg_file, open(
        align_path, "w", encoding="utf-8", newline=""
    ) as align_file:
        dl_writer = Y4MWriter(dl_file, header)
        fgbg_writer = Y4MWriter(fgbg_file, mono_header)
        align_file.write("position,input_frame\n")
        for position, rebuilt in enumerate(reconstruct_stream(frames, records)):
            dl_writer.write_frame(rebuilt.color)
            fgbg_writer.write_frame(
                Frame(
                    position,
                    header.width,
                    header.height,
                    PixelFormat.GRAY8,
                    rebuilt.restored.tobytes(),
                )
            )
            align_file.write(f"{position},{rebuilt.input_index}\n")
        dl_writer.flush()
        fgbg_writer.flush()
    return dl_path, fgbg_path, align_path
