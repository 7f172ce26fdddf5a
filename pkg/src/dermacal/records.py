"""Patch-level measurement records and their CSV schema.

One record is a single color measurement of a facial region: subject,
device, region, angle label, and the display-referred sRGB triple. The
on-disk schema (version 1) is a UTF-8 CSV with header

    subject_id,device,region,angle,r,g,b

where r/g/b are either all 8-bit integers (0-255) or all unit-interval
decimals; the column type is autodetected per file and must not be mixed.
8-bit values are divided by exactly 255 on ingestion. Exported files carry
unit-interval decimals at full precision, so a simulator export re-ingests
and re-exports byte-identically.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass

from .errors import IngestError

CSV_COLUMNS = ("subject_id", "device", "region", "angle", "r", "g", "b")

_INT_RE = re.compile(r"^[+-]?\d+$")


@dataclass(frozen=True)
class PatchRecord:
    """One measured skin patch; rgb is display-referred sRGB in [0, 1]."""

    subject_id: str
    device: str
    region: str
    angle: int
    rgb: tuple

    @property
    def key(self):
        return (self.subject_id, self.device, self.region, self.angle)


def _detect_rgb_mode(rows, path):
    """Decide between 8-bit integer and unit-decimal RGB columns."""
    saw_int = saw_decimal = False
    for line_no, row in rows:
        for col in ("r", "g", "b"):
            text = row[col].strip()
            if _INT_RE.match(text):
                saw_int = True
            else:
                saw_decimal = True
    if saw_int and saw_decimal:
        raise IngestError(
            f"{path}: mixed integer and decimal RGB values; "
            "a file must use one column type throughout"
        )
    return "eight_bit" if saw_int else "unit"


def _parse_rgb(text, mode, line_no, column, path):
    try:
        value = float(text)
    except ValueError:
        raise IngestError(f"{path}: invalid number {text!r}", row=line_no, column=column)
    if mode == "eight_bit":
        if not (0 <= value <= 255):
            raise IngestError(
                f"{path}: RGB value {text} outside [0, 255]", row=line_no, column=column
            )
        return value / 255.0
    if not (0.0 <= value <= 1.0):
        raise IngestError(
            f"{path}: RGB value {text} outside [0, 1]", row=line_no, column=column
        )
    return value


def read_patch_csv(path):
    """Read and validate a patch CSV; returns a list of ``PatchRecord``.

    Errors cite the file line number (header is line 1) and column name.
    Duplicate (subject, device, region, angle) keys are rejected.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file (missing header)")
        header = tuple(h.strip() for h in header)
        unknown = [h for h in header if h not in CSV_COLUMNS]
        if unknown:
            raise IngestError(f"{path}: unknown column {unknown[0]!r}", row=1)
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise IngestError(f"{path}: missing column {missing[0]!r}", row=1)

        rows = []
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise IngestError(
                    f"{path}: expected {len(header)} fields, got {len(raw)}", row=line_no
                )
            rows.append((line_no, dict(zip(header, raw))))

    if not rows:
        raise IngestError(f"{path}: no data rows")

    mode = _detect_rgb_mode(rows, path)
    records = []
    seen = {}
    for line_no, row in rows:
        subject = row["subject_id"].strip()
        device = row["device"].strip()
        region = row["region"].strip()
        if not subject or not device or not region:
            empty = next(
                c for c in ("subject_id", "device", "region") if not row[c].strip()
            )
            raise IngestError(f"{path}: empty value", row=line_no, column=empty)
        angle_text = row["angle"].strip()
        if not _INT_RE.match(angle_text):
            raise IngestError(
                f"{path}: angle must be an integer label, got {angle_text!r}",
                row=line_no,
                column="angle",
            )
        rgb = tuple(
            _parse_rgb(row[c].strip(), mode, line_no, c, path) for c in ("r", "g", "b")
        )
        record = PatchRecord(subject, device, region, int(angle_text), rgb)
        if record.key in seen:
            raise IngestError(
                f"{path}: duplicate key {record.key} (first seen at row {seen[record.key]})",
                row=line_no,
            )
        seen[record.key] = line_no
        records.append(record)
    return records


def write_patch_csv(records, path):
    """Write records as unit-interval decimal CSV (full float precision)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    rec.subject_id,
                    rec.device,
                    rec.region,
                    rec.angle,
                    repr(float(rec.rgb[0])),
                    repr(float(rec.rgb[1])),
                    repr(float(rec.rgb[2])),
                ]
            )


def devices_in(records):
    """Sorted distinct device labels."""
    return sorted({rec.device for rec in records})


def subjects_in(records):
    """Sorted distinct subject ids."""
    return sorted({rec.subject_id for rec in records})


def regions_in(records):
    """Sorted distinct region labels."""
    return sorted({rec.region for rec in records})
