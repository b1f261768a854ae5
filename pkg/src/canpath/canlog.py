"""candump-style CAN log parsing, formatting and ID/mask filtering.

A log line looks like ``(1684149582.123456) can0 0C6#7DC80000AAAAAAAA``:
timestamp in seconds since the epoch, interface name, 11-bit identifier in
hex, and up to 8 data bytes in hex after the ``#``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, TextIO

MAX_STD_ID = 0x7FF


class LogParseError(ValueError):
    """A log line that does not parse; names the offending field."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


@dataclass(frozen=True)
class CanFrame:
    """One timestamped CAN message."""

    timestamp: float
    interface: str
    id: int
    data: bytes

    def __post_init__(self):
        if not 0 <= self.id <= MAX_STD_ID:
            raise ValueError(f"identifier 0x{self.id:X} out of 11-bit range")
        if len(self.data) > 8:
            raise ValueError(f"data length {len(self.data)} exceeds 8 bytes")
        if not (math.isfinite(self.timestamp) and self.timestamp >= 0):
            raise ValueError(f"timestamp {self.timestamp!r} not finite and non-negative")


@dataclass(frozen=True)
class IdFilter:
    """List of (id, mask) pairs with candump semantics.

    A frame passes iff for some entry ``(frame.id & mask) == (id & mask)``.
    """

    entries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for fid, mask in self.entries:
            if not (0 <= fid <= MAX_STD_ID and 0 <= mask <= MAX_STD_ID):
                raise ValueError(f"filter entry {fid:X}:{mask:X} out of 11-bit range")

    @classmethod
    def parse(cls, text: str) -> "IdFilter":
        """Parse the candump notation ``7E8:7FF,0C6:7FF``."""
        entries = []
        text = text.strip()
        if text:
            for part in text.split(","):
                try:
                    fid, mask = part.split(":")
                    entries.append((int(fid, 16), int(mask, 16)))
                except ValueError:
                    raise LogParseError(f"bad filter entry {part!r}") from None
        return cls(tuple(entries))

    def __str__(self) -> str:
        return ",".join(f"{fid:X}:{mask:X}" for fid, mask in self.entries)

    def matches(self, frame_id: int) -> bool:
        return any((frame_id & mask) == (fid & mask) for fid, mask in self.entries)


def parse_line(line: str, line_no: int | None = None) -> CanFrame:
    """Parse one candump log line into a frame.

    Raises LogParseError naming the bad field (timestamp, identifier, data).
    """
    text = line.strip()
    close = text.find(")")
    if not text.startswith("(") or close < 0:
        raise LogParseError(f"missing timestamp parentheses in {text!r}", line_no)
    ts_text = text[1:close]
    try:
        timestamp = float(ts_text)
    except ValueError:
        raise LogParseError(f"malformed timestamp {ts_text!r}", line_no) from None
    if not (math.isfinite(timestamp) and timestamp >= 0):
        raise LogParseError(f"malformed timestamp {ts_text!r}", line_no)

    rest = text[close + 1 :].split()
    if len(rest) != 2:
        raise LogParseError(f"expected '<iface> <ID>#<DATA>' after timestamp in {text!r}", line_no)
    interface, frame_text = rest
    if "#" not in frame_text:
        raise LogParseError(f"missing '#' separator in {frame_text!r}", line_no)
    id_text, data_text = frame_text.split("#", 1)

    try:
        frame_id = int(id_text, 16)
    except ValueError:
        raise LogParseError(f"identifier {id_text!r} is not hex", line_no) from None
    if frame_id > MAX_STD_ID:
        raise LogParseError(f"identifier 0x{id_text} out of 11-bit range", line_no)

    if len(data_text) % 2 != 0:
        raise LogParseError(f"odd-length data {data_text!r}", line_no)
    if len(data_text) > 16:
        raise LogParseError(f"data {data_text!r} exceeds 8 bytes", line_no)
    try:
        data = bytes.fromhex(data_text)
    except ValueError:
        raise LogParseError(f"data {data_text!r} is not hex", line_no) from None

    return CanFrame(timestamp=timestamp, interface=interface, id=frame_id, data=data)


def format_line(frame: CanFrame) -> str:
    """Canonical candump form: uppercase hex, 6-digit fractional seconds."""
    return f"({frame.timestamp:.6f}) {frame.interface} {frame.id:03X}#{frame.data.hex().upper()}"


def filter_frames(frames: Iterable[CanFrame], id_filter: IdFilter) -> list[CanFrame]:
    """Keep exactly the frames matching any filter entry, preserving order."""
    return [f for f in frames if id_filter.matches(f.id)]


def parse_log(
    lines: Iterable[str], strict: bool = True
) -> tuple[list[CanFrame], list[tuple[int, str]]]:
    """Parse a multi-line log.

    Blank lines are ignored. In strict mode the first bad line aborts with
    LogParseError; otherwise bad lines are skipped and reported as
    (line_no, message) pairs, since real captures contain noise.
    """
    frames: list[CanFrame] = []
    skipped: list[tuple[int, str]] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            frames.append(parse_line(line, line_no))
        except LogParseError as exc:
            if strict:
                raise
            skipped.append((line_no, str(exc)))
    return frames, skipped


def read_log(source: str | TextIO, strict: bool = True) -> tuple[list[CanFrame], list[tuple[int, str]]]:
    """Read a log from a file path or an open text stream."""
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fp:
            return parse_log(fp, strict=strict)
    return parse_log(source, strict=strict)


def write_log(frames: Iterable[CanFrame], dest: str | TextIO) -> None:
    if isinstance(dest, str):
        with open(dest, "w", encoding="utf-8") as fp:
            write_log(frames, fp)
        return
    for frame in frames:
        dest.write(format_line(frame) + "\n")
