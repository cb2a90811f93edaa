"""Byte-exact parsing of ``$$$$``-terminated record files (SDF style).

Records are addressed by the byte offset of their first byte.  Nothing in
this module ever normalises line terminators: ``raw`` is always the exact
slice of the source file.
"""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass, field
from functools import cached_property

from offsetforge.errors import MalformedRecord, SeekOutOfRange

DELIMITER = b"$$$$"
STREAM_CHUNK = 1 << 20
READ_BLOCK = 8192
DEFAULT_BUFFER_SIZE = 64 * 1024

_HEADER = re.compile(rb">[^<\r\n]*<([^>\r\n]+)>")
_MOL_END = re.compile(rb"^M  END[ \t]*\r?$", re.MULTILINE)


@dataclass(frozen=True)
class RecordLocation:
    source_file: str
    byte_offset: int

    def __iter__(self):
        yield self.source_file
        yield self.byte_offset


@dataclass(frozen=True)
class MoleculeRecord:
    """One delimited record.

    ``properties`` is parsed lazily from ``raw`` on first access, so streaming
    millions of records only pays for the fields that are actually looked at.
    Equality is byte equality of ``raw`` plus location.
    """

    raw: bytes = field(repr=False)
    start_offset: int
    source_file: str = ""

    def __repr__(self):
        return (
            f"MoleculeRecord(source_file={self.source_file!r}, "
            f"start_offset={self.start_offset}, length={len(self.raw)})"
        )

    @property
    def end_offset(self):
        return self.start_offset + len(self.raw)

    @property
    def location(self):
        return RecordLocation(self.source_file, self.start_offset)

    @cached_property
    def _parsed(self):
        return parse_properties(self.raw)

    @property
    def properties(self) -> dict[str, str]:
        return self._parsed[0]

    @property
    def duplicate_property_count(self) -> int:
        """How many property headers were shadowed by a later header of the same name."""
        return self._parsed[1]


def _line_content_end(raw, start, nl):
    """End of a line's content, excluding ``\\n`` and one trailing ``\\r``."""
    end = nl if nl >= 0 else len(raw)
    if end > start and raw[end - 1 : end] == b"\r":
        end -= 1
    return end


def _decode(value: bytes) -> str:
    return value.decode("utf-8", errors="replace")


def parse_properties(raw: bytes) -> tuple[dict[str, str], int]:
    """Parse the ``> <NAME>`` data blocks of one record.

    Returns the property map and the number of duplicate headers seen
    (the last occurrence of a name wins).  The data block starts after the
    molblock's ``M  END`` line when there is one, otherwise at the top of
    the record.
    """
    m = _MOL_END.search(raw)
    pos = 0
    if m is not None:
        nl = raw.find(b"\n", m.end())
        pos = len(raw) if nl < 0 else nl + 1

    props: dict[str, str] = {}
    dupes = 0
    name = None
    vstart = vend = -1
    n = len(raw)
    while pos < n:
        nl = raw.find(b"\n", pos)
        cend = _line_content_end(raw, pos, nl)
        line = raw[pos:cend]
        if name is None:
            if line[:1] == b">":
                h = _HEADER.match(line)
                if h is not None:
                    name = _decode(h.group(1))
                    vstart = vend = -1
        elif line.strip() == b"" or line == DELIMITER:
            if name in props:
                dupes += 1
            props[name] = _decode(raw[vstart:vend]) if vstart >= 0 else ""
            name = None
        else:
            if vstart < 0:
                vstart = pos
            vend = cend
        if nl < 0:
            break
        pos = nl + 1
    if name is not None:
        if name in props:
            dupes += 1
        props[name] = _decode(raw[vstart:vend]) if vstart >= 0 else ""
    return props, dupes


def get_property(record: MoleculeRecord, name: str) -> str | None:
    return record.properties.get(name)


def _delimiter_end(buf: bytes, rec_start: int, scan: int, eof: bool):
    """Locate the end of the record starting at ``buf[rec_start]``.

    Returns ``(end, scan)``.  ``end`` is the index just past the delimiter
    line's terminator, or ``None`` when the buffer does not (yet) hold a
    complete delimiter line; ``scan`` is where to resume searching once
    more bytes have been appended.
    """
    while True:
        i = buf.find(DELIMITER, scan)
        if i < 0:
            return None, max(scan, len(buf) - len(DELIMITER) + 1, rec_start)
        if i != rec_start and buf[i - 1 : i] != b"\n":
            scan = i + 1
            continue
        j = i + len(DELIMITER)
        tail = buf[j : j + 2]
        if tail[:1] == b"\n":
            return j + 1, j + 1
        if tail == b"\r\n":
            return j + 2, j + 2
        if len(tail) < 2 and not eof:
            # the line terminator (or its absence) is not buffered yet
            return None, i
        if eof and (j == len(buf) or (tail == b"\r" and j + 1 == len(buf))):
            return len(buf), len(buf)
        scan = i + 1


def stream_records(file, source_name: str = "", chunk_size: int = STREAM_CHUNK):
    """Yield every record of a byte stream in file order.

    Works on any object with ``read(n)`` (decompressing readers included);
    memory use is bounded by the chunk size plus the largest record.
    Trailing whitespace after the last delimiter is ignored; any other
    trailing content raises :class:`MalformedRecord`.
    """
    buf = b""
    base = 0
    rec_start = 0
    scan = 0
    eof = False
    while True:
        end, scan = _delimiter_end(buf, rec_start, scan, eof)
        if end is not None:
            yield MoleculeRecord(buf[rec_start:end], base + rec_start, source_name)
            rec_start = scan = end
            continue
        if eof:
            break
        buf = buf[rec_start:]
        base += rec_start
        scan -= rec_start
        rec_start = 0
        chunk = file.read(chunk_size)
        if chunk:
            buf += chunk
        else:
            eof = True

    tail = buf[rec_start:]
    if tail.strip():
        raise MalformedRecord(
            f"unterminated record at byte {base + rec_start} of {source_name or '<stream>'}",
            offset=base + rec_start,
            source=source_name,
        )


def iter_file_records(path, source_name: str | None = None):
    with open(path, "rb") as fh:
        yield from stream_records(fh, source_name if source_name is not None else os.fspath(path))


def _stream_size(file) -> int:
    try:
        return os.fstat(file.fileno()).st_size
    except (AttributeError, OSError, io.UnsupportedOperation):
        here = file.tell()
        size = file.seek(0, io.SEEK_END)
        file.seek(here)
        return size


class RecordReader:
    """Positioned record reads over one open, seekable, uncompressed file.

    Keeps a forward window of already-read bytes.  A request that lands
    inside the window is served from memory; one that lies a short gap
    ahead (gap plus one read block fits in ``buffer_size``) is reached by
    reading through the gap instead of seeking; anything else seeks.
    ``bytes_read`` counts bytes actually pulled from the file.

    Not safe to share between threads.
    """

    def __init__(self, file, source_name: str = "", buffer_size: int = DEFAULT_BUFFER_SIZE,
                 block_size: int = READ_BLOCK):
        if buffer_size < 1 or block_size < 1:
            raise ValueError("buffer_size and block_size must be positive")
        self.file = file
        self.source_name = source_name
        self.buffer_size = buffer_size
        self.block_size = min(block_size, buffer_size)
        self.size = _stream_size(file)
        self.bytes_read = 0
        self.reads = 0
        self.physical_seeks = 0
        self._buf = b""
        self._base = 0
        self._fpos = None  # file position, unknown until our first seek

    def _read(self, n):
        data = self.file.read(n)
        if data:
            self.bytes_read += len(data)
            self._fpos += len(data)
        return data

    def _position(self, offset):
        window_end = self._base + len(self._buf)
        if self._fpos is not None and self._base <= offset <= window_end:
            self._buf = self._buf[offset - self._base :]
            self._base = offset
            return
        gap = offset - window_end
        if self._fpos == window_end and 0 < gap and gap + self.block_size <= self.buffer_size:
            while gap > 0:
                data = self._read(gap)
                if not data:
                    break
                gap -= len(data)
            if gap == 0:
                self._buf = b""
                self._base = offset
                return
        self.file.seek(offset)
        self.physical_seeks += 1
        self._fpos = offset
        self._buf = b""
        self._base = offset

    def read_at(self, offset: int) -> MoleculeRecord:
        if offset < 0 or offset >= self.size:
            raise SeekOutOfRange(offset, self.size, self.source_name)
        self.reads += 1
        self._position(offset)
        scan = 0
        eof = False
        while True:
            end, scan = _delimiter_end(self._buf, 0, scan, eof)
            if end is not None:
                break
            if eof:
                raise MalformedRecord(
                    f"no delimiter after byte {offset} of {self.source_name or '<stream>'}",
                    offset=offset,
                    source=self.source_name,
                )
            data = self._read(self.block_size)
            if data:
                self._buf += data
            else:
                eof = True
        raw = self._buf[:end]
        self._buf = self._buf[end:]
        self._base += end
        return MoleculeRecord(raw, offset, self.source_name)


def read_record_at(file, offset: int, source_name: str = "") -> MoleculeRecord:
    """Seek to ``offset`` and read exactly one record."""
    return RecordReader(file, source_name, block_size=READ_BLOCK).read_at(offset)
