"""CSV sidecar mapping compressed frames back to source positions.

Schema: header ``input_frame,output_frame,full_frame``, then one row per
emitted frame.  ``input_frame`` is the 0-based position in the source
video, ``output_frame`` the 0-based position in the compressed video, and
``full_frame`` is 1 for unmasked reference frames, 0 for masked ones.
Rows appear in emit order, so input indices are strictly increasing and
output indices run 0, 1, 2, ... without gaps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Iterable

from .errors import MalformedRow, NonMonotonicIndex

FIELDNAMES = ("input_frame", "output_frame", "full_frame")


@dataclass(frozen=True)
class SidecarRecord:
    """One emitted frame: where it came from, where it landed, and whether
    it is a full reference frame."""

    input_frame: int
    output_frame: int
    full_frame: bool


class SidecarWriter:
    """Streaming writer; the header row is written at construction."""

    def __init__(self, sink: IO[str]):
        self._writer = csv.writer(sink, lineterminator="\n")
        self._writer.writerow(FIELDNAMES)

    def write_row(self, record: SidecarRecord) -> None:
        self._writer.writerow(
            (record.input_frame, record.output_frame, int(record.full_frame))
        )


def write_sidecar(records: Iterable[SidecarRecord], sink: IO[str]) -> None:
    writer = SidecarWriter(sink)
    for record in records:
        writer.write_row(record)


def read_sidecar(source: Iterable[str]) -> list[SidecarRecord]:
    """Parse and validate a sidecar CSV.

    Raises MalformedRow for schema violations (bad header, wrong field
    count, non-integer values, flags outside {0, 1}) and NonMonotonicIndex
    when row order breaks the strictly-increasing-input / consecutive-output
    invariants.
    """
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow("missing header row") from None
    if tuple(header) != FIELDNAMES:
        raise MalformedRow(f"bad header row {header!r}")

    records: list[SidecarRecord] = []
    previous_input = -1
    for row_number, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != 3:
            raise MalformedRow(f"row {row_number}: expected 3 fields, got {len(row)}")
        try:
            input_frame, output_frame, flag = (int(field) for field in row)
        except ValueError:
            raise MalformedRow(f"row {row_number}: non-integer field") from None
        if flag not in (0, 1):
            raise MalformedRow(f"row {row_number}: full_frame must be 0 or 1")
        if input_frame < 0:
            raise MalformedRow(f"row {row_number}: negative input_frame")
        if input_frame <= previous_input:
            raise NonMonotonicIndex(
                f"row {row_number}: input_frame {input_frame} after {previous_input}"
            )
        if output_frame != len(records):
            raise NonMonotonicIndex(
                f"row {row_number}: output_frame {output_frame}, expected {len(records)}"
            )
        previous_input = input_frame
        records.append(SidecarRecord(input_frame, output_frame, bool(flag)))
    return records
