"""Identifier -> (file, byte offset) index: parallel build, CSV persistence, verification.

The on-disk format is a CSV file preceded by ``#`` metadata lines::

    # scheme=full
    # id_property=PUBCHEM_IUPAC_INCHI
    # file=Compound_000.sdf,1048576
    identifier,filename,byte_offset
    "InChI=1S/C2H6O/c1-2-3/h3H,2H2,1H3",Compound_000.sdf,0

Hashed-scheme indexes carry a fourth ``full_identifier`` column so that the
untruncated identifier survives a round trip.
"""

from __future__ import annotations

import csv
import logging
import os
import random
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from offsetforge.errors import FormatError, InvalidFilename, UnreadableFile, WriteFailure
from offsetforge.integrity import FULL, IdentifierScheme, hash_key
from offsetforge.records import RecordLocation, RecordReader, iter_file_records

log = logging.getLogger(__name__)

DEFAULT_ID_PROPERTY = "PUBCHEM_IUPAC_INCHI"
DEFAULT_PATTERN = "*.sdf"
HEADER = ["identifier", "filename", "byte_offset"]
HASHED_HEADER = HEADER + ["full_identifier"]


@dataclass(frozen=True)
class IndexEntry:
    key: str
    location: RecordLocation
    full_identifier: str


@dataclass(frozen=True)
class FileFingerprint:
    source_file: str
    size: int


@dataclass
class BuildStats:
    """Counters from a build.  Absent on indexes loaded from disk."""

    files_scanned: int = 0
    records_scanned: int = 0
    records_skipped: int = 0
    empty_files: list[str] = field(default_factory=list)
    unreadable_files: list[str] = field(default_factory=list)
    wall_time: float = 0.0


@dataclass
class PersistentIndex:
    """Immutable-by-convention multimap from key to every location carrying it.

    ``entries`` maps each key to a list of ``(RecordLocation, full_identifier)``
    sorted by file then offset.  Equality covers entries, scheme, identifier
    property and fingerprint, not build statistics.
    """

    entries: dict[str, list[tuple[RecordLocation, str]]]
    scheme: IdentifierScheme = FULL
    id_property: str = DEFAULT_ID_PROPERTY
    fingerprint: list[FileFingerprint] = field(default_factory=list)
    build_stats: BuildStats | None = field(default=None, compare=False, repr=False)

    @property
    def entry_count(self) -> int:
        return sum(len(v) for v in self.entries.values())

    def __len__(self):
        return self.entry_count

    def lookup(self, key: str) -> list[tuple[RecordLocation, str]]:
        return self.entries.get(key, [])

    def __contains__(self, key):
        return key in self.entries

    def iter_entries(self):
        """Yield ``(key, location, full_identifier)`` in key, file, offset order."""
        for key in sorted(self.entries):
            for loc, full in self.entries[key]:
                yield key, loc, full

    def index_entries(self):
        return [IndexEntry(k, loc, full) for k, loc, full in self.iter_entries()]

    def files(self):
        return [fp.source_file for fp in self.fingerprint]

    def rekeyed(self, scheme: IdentifierScheme) -> "PersistentIndex":
        entries = defaultdict(list)
        for _, loc, full in self.iter_entries():
            entries[hash_key(full, scheme)].append((loc, full))
        for v in entries.values():
            v.sort(key=_loc_order)
        return PersistentIndex(dict(entries), scheme, self.id_property, list(self.fingerprint))


def _loc_order(item):
    loc = item[0]
    return loc.source_file, loc.byte_offset


def _check_filename(name: str):
    if any(c in name for c in ',"\r\n'):
        raise InvalidFilename(f"file name {name!r} contains a comma, quote or line break")


def list_record_files(directory, pattern: str = DEFAULT_PATTERN) -> list[str]:
    """Relative POSIX paths of matching files, in lexicographic order."""
    root = Path(directory)
    if not root.is_dir():
        raise UnreadableFile(root, "not a directory")
    return sorted(p.relative_to(root).as_posix() for p in root.glob(pattern) if p.is_file())


def scan_file(root, name: str, id_property: str, scheme: IdentifierScheme):
    """Index one file.  Returns ``(name, size, rows, records, skipped)``.

    ``rows`` holds ``(key, full_identifier, offset)`` in file order.
    """
    path = Path(root) / name
    rows = []
    records = skipped = 0
    try:
        size = path.stat().st_size
        for rec in iter_file_records(path, name):
            records += 1
            full = rec.properties.get(id_property)
            if full is None:
                skipped += 1
                continue
            rows.append((hash_key(full, scheme), full, rec.start_offset))
    except OSError as exc:
        raise UnreadableFile(path, exc.strerror or str(exc)) from exc
    return name, size, rows, records, skipped


def _scan_task(args):
    root, name, id_property, scheme = args
    try:
        return scan_file(root, name, id_property, scheme)
    except UnreadableFile as exc:
        return exc


def build_index(directory, worker_count: int = 1, scheme: IdentifierScheme = FULL,
                id_property: str = DEFAULT_ID_PROPERTY, pattern: str = DEFAULT_PATTERN,
                fail_fast: bool = False) -> PersistentIndex:
    """Scan every matching file (one task per file) and merge into one index.

    The merge is ordered by file name then offset, so the result does not
    depend on ``worker_count`` or on completion order.  Records without
    ``id_property`` are skipped and counted; unreadable files are logged and
    left out of the fingerprint unless ``fail_fast`` is set.
    """
    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    t0 = time.perf_counter()
    names = list_record_files(directory, pattern)
    for name in names:
        _check_filename(name)
    tasks = [(os.fspath(directory), name, id_property, scheme) for name in names]

    if worker_count == 1 or len(tasks) <= 1:
        results = map(_scan_task, tasks)
        results = list(results)
    else:
        with ProcessPoolExecutor(max_workers=min(worker_count, len(tasks))) as pool:
            results = list(pool.map(_scan_task, tasks, chunksize=1))

    stats = BuildStats()
    entries: dict[str, list[tuple[RecordLocation, str]]] = defaultdict(list)
    fingerprint = []
    for res in results:
        if isinstance(res, UnreadableFile):
            if fail_fast:
                raise res
            log.warning("%s", res)
            stats.unreadable_files.append(os.fspath(res.path))
            continue
        name, size, rows, records, skipped = res
        fingerprint.append(FileFingerprint(name, size))
        stats.files_scanned += 1
        stats.records_scanned += records
        stats.records_skipped += skipped
        if records and skipped == records:
            log.warning("%s: no record carries %s", name, id_property)
            stats.empty_files.append(name)
        for key, full, offset in rows:
            entries[key].append((RecordLocation(name, offset), full))
    # files arrive in name order and rows in offset order, so lists are sorted already
    stats.wall_time = time.perf_counter() - t0
    return PersistentIndex(dict(entries), scheme, id_property, fingerprint, stats)


def write_index_csv(index: PersistentIndex, out) -> int:
    """Write ``index`` to ``out`` and return the number of bytes written."""
    hashed = not index.scheme.is_full
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# scheme={index.scheme}\n")
            fh.write(f"# id_property={index.id_property}\n")
            for fp in index.fingerprint:
                fh.write(f"# file={fp.source_file},{fp.size}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(HASHED_HEADER if hashed else HEADER)
            if hashed:
                writer.writerows(
                    (key, loc.source_file, loc.byte_offset, full) for key, loc, full in index.iter_entries()
                )
            else:
                writer.writerows((key, loc.source_file, loc.byte_offset) for key, loc, _ in index.iter_entries())
    except OSError as exc:
        raise WriteFailure(f"cannot write index {out}: {exc}") from exc
    return os.path.getsize(out)


def _parse_metadata(line: str, lineno: int, meta: dict, fingerprint: list):
    body = line[1:].strip()
    name, sep, value = body.partition("=")
    if not sep:
        return
    if name == "scheme":
        try:
            meta["scheme"] = IdentifierScheme.parse(value)
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
    elif name == "id_property":
        meta["id_property"] = value
    elif name == "file":
        fname, _, size = value.rpartition(",")
        try:
            fingerprint.append(FileFingerprint(fname, int(size)))
        except ValueError:
            raise FormatError(f"bad file fingerprint {value!r}", lineno) from None


def load_index_csv(path) -> PersistentIndex:
    meta = {"scheme": FULL, "id_property": DEFAULT_ID_PROPERTY}
    fingerprint: list[FileFingerprint] = []
    entries: dict[str, list[tuple[RecordLocation, str]]] = defaultdict(list)
    with open(path, encoding="utf-8", newline="") as fh:
        lineno = 0
        header = None
        for line in fh:
            lineno += 1
            if line.startswith("#"):
                _parse_metadata(line, lineno, meta, fingerprint)
                continue
            header = next(csv.reader([line]))
            break
        if header is None:
            raise FormatError("missing header row", lineno + 1)
        scheme = meta["scheme"]
        expected = HEADER if scheme.is_full else HASHED_HEADER
        if header != expected:
            raise FormatError(f"expected header {','.join(expected)}, found {','.join(header)}", lineno)

        width = len(expected)
        reader = csv.reader(fh)
        for row in reader:
            rowno = lineno + reader.line_num
            if len(row) != width:
                raise FormatError(f"expected {width} columns, found {len(row)}", rowno)
            key, fname, offset = row[0], row[1], row[2]
            try:
                offset = int(offset)
            except ValueError:
                raise FormatError(f"byte_offset {row[2]!r} is not an integer", rowno) from None
            if offset < 0:
                raise FormatError(f"byte_offset {offset} is negative", rowno)
            full = row[3] if width == 4 else key
            entries[key].append((RecordLocation(fname, offset), full))
    for v in entries.values():
        v.sort(key=_loc_order)
    return PersistentIndex(dict(entries), scheme, meta["id_property"], fingerprint)


@dataclass(frozen=True)
class Drift:
    source_file: str
    indexed_size: int
    current_size: int | None  # None when the file is gone


def fingerprint_drift(index: PersistentIndex, directory) -> list[Drift]:
    root = Path(directory)
    drift = []
    for fp in index.fingerprint:
        try:
            size = (root / fp.source_file).stat().st_size
        except OSError:
            size = None
        if size != fp.size:
            drift.append(Drift(fp.source_file, fp.size, size))
    return drift


@dataclass
class VerificationSummary:
    checked: int = 0
    passed: int = 0
    failed: int = 0
    failures: list[tuple[IndexEntry, str]] = field(default_factory=list)
    drift: list[Drift] = field(default_factory=list)

    @property
    def ok(self):
        return self.failed == 0 and not self.drift


def verify_index(index: PersistentIndex, directory, sample_fraction: float = 1.0,
                 seed: int = 0) -> VerificationSummary:
    """Re-read a seeded uniform sample of entries and compare identifiers.

    Each failure is recorded with a short reason (identifier mismatch,
    unreadable location).  File size changes since indexing are reported as
    drift.
    """
    if not 0.0 <= sample_fraction <= 1.0:
        raise ValueError("sample_fraction must lie in [0, 1]")
    summary = VerificationSummary(drift=fingerprint_drift(index, directory))
    entries = index.index_entries()
    k = round(sample_fraction * len(entries))
    sample = sorted(random.Random(seed).sample(range(len(entries)), k))
    by_file = defaultdict(list)
    for i in sample:
        by_file[entries[i].location.source_file].append(entries[i])

    root = Path(directory)
    for fname in sorted(by_file):
        group = sorted(by_file[fname], key=lambda e: e.location.byte_offset)
        try:
            fh = open(root / fname, "rb", buffering=0)
        except OSError as exc:
            for e in group:
                summary.failures.append((e, f"unreadable: {exc.strerror}"))
            summary.checked += len(group)
            summary.failed += len(group)
            continue
        with fh:
            reader = RecordReader(fh, fname)
            for e in group:
                summary.checked += 1
                try:
                    observed = reader.read_at(e.location.byte_offset).properties.get(index.id_property)
                except Exception as exc:  # noqa: BLE001 - any read problem is a failed check
                    summary.failed += 1
                    summary.failures.append((e, f"unreadable: {exc}"))
                    continue
                if observed == e.full_identifier:
                    summary.passed += 1
                else:
                    summary.failed += 1
                    summary.failures.append((e, f"observed {observed!r}"))
    return summary
