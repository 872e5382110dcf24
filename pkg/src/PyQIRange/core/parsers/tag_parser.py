"""
Tag Parser Module

Readers for time-tag files.

QTT1 layout (little-endian):

    offset 0   4 bytes   magic "QTT1"
    offset 4   u64       record count N
    offset 12  N x 16 bytes: u32 channel, u32 flags, u64 timestamp (ps)

The CSV form has the header channel,flags,timestamp_ps.
"""
import logging
from pathlib import Path
from typing import Dict, Iterable, Tuple

import numpy as np
import pandas as pd

from PyQIRange.core.models.time_tags import TimeTagStream

QTT1_MAGIC = b"QTT1"
QTT1_HEADER = np.dtype([("magic", "S4"), ("count", "<u8")])
QTT1_RECORD = np.dtype([("channel", "<u4"), ("flags", "<u4"), ("timestamp", "<u8")])
QTT1_HEADER_SIZE = QTT1_HEADER.itemsize
TAG_CSV_COLUMNS = ("channel", "flags", "timestamp_ps")

_INT64_MAX = np.iinfo(np.int64).max


class TagFileError(ValueError):
    """Malformed time-tag file; the message carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int, source: str = "") -> None:
        self.offset = offset
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{message} at byte offset {offset}")


def parse_qtt1(data: bytes, source: str = "") -> np.ndarray:
    """
    Decode QTT1 bytes into a structured record array.

    Raises:
        TagFileError: on a bad magic, truncated header or record, trailing bytes or a
                      timestamp beyond the signed 64-bit range.
    """
    if len(data) < QTT1_HEADER_SIZE:
        if data[:len(QTT1_MAGIC)] != QTT1_MAGIC[:len(data)]:
            raise TagFileError("bad magic (expected 'QTT1')", 0, source)
        raise TagFileError(f"truncated header ({len(data)} of {QTT1_HEADER_SIZE} bytes)", len(data), source)
    header = np.frombuffer(data, dtype=QTT1_HEADER, count=1)[0]
    if bytes(header["magic"]) != QTT1_MAGIC:
        raise TagFileError(f"bad magic {bytes(header['magic'])!r} (expected 'QTT1')", 0, source)
    count = int(header["count"])

    body = len(data) - QTT1_HEADER_SIZE
    available = body // QTT1_RECORD.itemsize
    if available < count:
        raise TagFileError(f"truncated record {available} (header declares {count} records)",
                           QTT1_HEADER_SIZE + available * QTT1_RECORD.itemsize, source)
    expected_size = QTT1_HEADER_SIZE + count * QTT1_RECORD.itemsize
    if len(data) > expected_size:
        raise TagFileError(f"{len(data) - expected_size} trailing bytes after {count} records", expected_size, source)

    records = np.frombuffer(data, dtype=QTT1_RECORD, count=count, offset=QTT1_HEADER_SIZE)
    overflow = np.flatnonzero(records["timestamp"] > _INT64_MAX)
    if overflow.size:
        offset = QTT1_HEADER_SIZE + int(overflow[0]) * QTT1_RECORD.itemsize + 8
        raise TagFileError("timestamp exceeds the signed 64-bit range", offset, source)
    return records


def read_tag_file(file_path: Path) -> np.ndarray:
    """
    Read a QTT1 file.

    Raises:
        TagFileError: if the file is malformed.
        FileNotFoundError: if the file does not exist.
    """
    data = Path(file_path).read_bytes()
    records = parse_qtt1(data, str(file_path))
    logging.debug(f"Read {records.size} tags from {file_path}")
    return records


def records_to_streams(records: np.ndarray, channels: Iterable[int] = ()) -> Dict[int, TimeTagStream]:
    """
    Split (channel, flags, timestamp) records into one stream per channel, keeping file order.

    Channels listed in `channels` are present in the result even without records.
    """
    streams = {int(c): TimeTagStream.empty(int(c)) for c in channels}
    for channel in np.unique(records["channel"]):
        mask = records["channel"] == channel
        streams[int(channel)] = TimeTagStream(
            int(channel), records["timestamp"][mask].astype(np.int64), records["flags"][mask])
    return streams


def read_tag_streams(file_path: Path, channels: Iterable[int] = ()) -> Dict[int, TimeTagStream]:
    return records_to_streams(read_tag_file(file_path), channels)


def read_tag_csv(file_path: Path) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Read the CSV tag export.

    Returns:
        Tuple of (channels, flags, timestamps) arrays

    Raises:
        TagFileError: if the header or values are invalid.
    """
    text = Path(file_path).read_text(encoding="utf-8")
    header = text.split("\n", 1)[0].strip()
    if tuple(header.split(",")) != TAG_CSV_COLUMNS:
        raise TagFileError(f"unexpected CSV header '{header}'", 0, str(file_path))
    try:
        frame = pd.read_csv(file_path, dtype={"channel": np.uint32, "flags": np.uint32, "timestamp_ps": np.int64})
    except (ValueError, OverflowError) as e:
        raise TagFileError(f"invalid CSV tag values ({e})", len(header) + 1, str(file_path))
    if (frame["timestamp_ps"] < 0).any():
        raise TagFileError("negative timestamp", len(header) + 1, str(file_path))
    return (frame["channel"].to_numpy(np.uint32), frame["flags"].to_numpy(np.uint32),
            frame["timestamp_ps"].to_numpy(np.int64))
