"""Target retrieval: the sequential baseline scan and index-driven seek extraction."""

from __future__ import annotations

import json
import logging
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from offsetforge.errors import FingerprintMismatch, MalformedRecord, SeekOutOfRange, UnreadableFile, WriteFailure
from offsetforge.index import DEFAULT_ID_PROPERTY, DEFAULT_PATTERN, PersistentIndex, fingerprint_drift, list_record_files
from offsetforge.integrity import hash_key
from offsetforge.records import DEFAULT_BUFFER_SIZE, MoleculeRecord, RecordLocation, RecordReader, stream_records

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Hit:
    target: str
    full_identifier: str
    record: MoleculeRecord


@dataclass(frozen=True)
class VerificationFailure:
    target: str
    location: RecordLocation
    observed: str | None
    reason: str = "identifier mismatch"


@dataclass
class ExtractionStats:
    files_opened: int = 0
    seeks_performed: int = 0
    physical_seeks: int = 0
    bytes_read: int = 0
    records_examined: int = 0
    wall_time: float = 0.0

    def add(self, other: "ExtractionStats"):
        self.files_opened += other.files_opened
        self.seeks_performed += other.seeks_performed
        self.physical_seeks += other.physical_seeks
        self.bytes_read += other.bytes_read
        self.records_examined += other.records_examined


@dataclass
class ExtractionReport:
    found: list[Hit] = field(default_factory=list)
    missing: set[str] = field(default_factory=set)
    verification_failures: list[VerificationFailure] = field(default_factory=list)
    stats: ExtractionStats = field(default_factory=ExtractionStats)
    fingerprint_drift: list = field(default_factory=list)

    @property
    def found_targets(self) -> set[str]:
        return {h.target for h in self.found}

    @property
    def failed_targets(self) -> set[str]:
        return {f.target for f in self.verification_failures}

    def records_by_target(self) -> dict[str, list[bytes]]:
        out = defaultdict(list)
        for h in self.found:
            out[h.target].append(h.record.raw)
        return dict(out)

    def to_dict(self):
        return {
            "found": [
                {
                    "target": h.target,
                    "full_identifier": h.full_identifier,
                    "filename": h.record.source_file,
                    "byte_offset": h.record.start_offset,
                    "byte_length": len(h.record.raw),
                }
                for h in self.found
            ],
            "missing": sorted(self.missing),
            "verification_failures": [
                {
                    "target": f.target,
                    "filename": f.location.source_file,
                    "byte_offset": f.location.byte_offset,
                    "observed": f.observed,
                    "reason": f.reason,
                }
                for f in self.verification_failures
            ],
            "fingerprint_drift": [
                {"filename": d.source_file, "indexed_size": d.indexed_size, "current_size": d.current_size}
                for d in self.fingerprint_drift
            ],
            "stats": {
                "files_opened": self.stats.files_opened,
                "seeks_performed": self.stats.seeks_performed,
                "physical_seeks": self.stats.physical_seeks,
                "bytes_read": self.stats.bytes_read,
                "records_examined": self.stats.records_examined,
                "wall_time": self.stats.wall_time,
            },
        }


def _unique(targets):
    return list(dict.fromkeys(targets))


def baseline_scan(directory, targets, id_property: str = DEFAULT_ID_PROPERTY,
                  pattern: str = DEFAULT_PATTERN) -> ExtractionReport:
    """One pass over every file in name order, testing each record against the
    set of still-missing targets and stopping once that set is empty.

    The first record carrying a target wins.  ``bytes_read`` counts bytes
    consumed by the parser, i.e. up to the end of the last record examined.
    """
    t0 = time.perf_counter()
    remaining = set(targets)
    report = ExtractionReport()
    stats = report.stats
    root = Path(directory)
    for name in list_record_files(root, pattern):
        if not remaining:
            break
        try:
            fh = open(root / name, "rb")
        except OSError as exc:
            raise UnreadableFile(root / name, exc.strerror or str(exc)) from exc
        stats.files_opened += 1
        with fh:
            for rec in stream_records(fh, name):
                stats.records_examined += 1
                stats.bytes_read += len(rec.raw)
                ident = rec.properties.get(id_property)
                if ident in remaining:
                    report.found.append(Hit(ident, ident, rec))
                    remaining.discard(ident)
                    if not remaining:
                        break
    report.missing = remaining
    report.found.sort(key=_hit_order)
    stats.wall_time = time.perf_counter() - t0
    return report


def _hit_order(h: Hit):
    return h.target, h.record.source_file, h.record.start_offset


@dataclass
class _Task:
    target: str
    location: RecordLocation
    full_identifier: str


def _extract_file(root: Path, fname: str, tasks: list[_Task], index: PersistentIndex,
                  buffer_size: int):
    """Worker: serve every task of one file through one handle."""
    stats = ExtractionStats()
    hits, failures = [], []
    scheme = index.scheme
    try:
        fh = open(root / fname, "rb", buffering=0)
    except OSError as exc:
        failures = [VerificationFailure(t.target, t.location, None, f"unreadable: {exc.strerror}") for t in tasks]
        return hits, failures, stats
    stats.files_opened = 1
    with fh:
        reader = RecordReader(fh, fname, buffer_size=buffer_size)
        for t in tasks:
            try:
                rec = reader.read_at(t.location.byte_offset)
            except (SeekOutOfRange, MalformedRecord) as exc:
                failures.append(VerificationFailure(t.target, t.location, None, str(exc)))
                continue
            observed = rec.properties.get(index.id_property)
            if observed is not None and hash_key(observed, scheme) == t.target:
                hits.append(Hit(t.target, observed, rec))
            else:
                failures.append(VerificationFailure(t.target, t.location, observed))
        stats.seeks_performed = reader.reads
        stats.physical_seeks = reader.physical_seeks
        stats.bytes_read = reader.bytes_read
        stats.records_examined = reader.reads
    return hits, failures, stats


def indexed_extract(index: PersistentIndex, directory, targets, worker_count: int = 1,
                    sort_offsets: bool = True, strict_fingerprint: bool = False,
                    buffer_size: int = DEFAULT_BUFFER_SIZE) -> ExtractionReport:
    """Seek-based extraction driven by a persistent index.

    Targets are keys under the index's scheme.  Locations are grouped by
    file; each file is opened once and its locations visited in ascending
    offset order (unless ``sort_offsets`` is off).  Every record read is
    checked against its target.

    Under the full scheme a target resolves to its first location (the
    record a baseline scan would return); later locations are tried only if
    earlier ones fail verification.  Under a hashed scheme every location of
    the key is read, so keys shared by distinct identifiers surface as
    several hits with different ``full_identifier`` values.
    """
    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    t0 = time.perf_counter()
    root = Path(directory)
    report = ExtractionReport()
    targets = _unique(targets)

    drift = fingerprint_drift(index, root) if targets else []
    if drift:
        if strict_fingerprint:
            raise FingerprintMismatch(drift)
        for d in drift:
            log.warning("%s changed size since indexing (%s -> %s)", d.source_file, d.indexed_size, d.current_size)
    report.fingerprint_drift = drift

    full = index.scheme.is_full
    first_pass: dict[str, list[_Task]] = defaultdict(list)
    fallbacks: dict[str, list[_Task]] = {}
    for target in targets:
        locs = index.lookup(target)
        if not locs:
            report.missing.add(target)
            continue
        tasks = [_Task(target, loc, ident) for loc, ident in locs]
        if full:
            first_pass[tasks[0].location.source_file].append(tasks[0])
            fallbacks[target] = tasks[1:]
        else:
            for t in tasks:
                first_pass[t.location.source_file].append(t)

    failures = _run_groups(root, first_pass, index, worker_count, sort_offsets, buffer_size, report)

    # full scheme: a target whose first location failed falls back to its next location
    while full and failures:
        retry: dict[str, list[_Task]] = defaultdict(list)
        for f in failures:
            rest = fallbacks.get(f.target)
            if rest:
                nxt = rest.pop(0)
                retry[nxt.location.source_file].append(nxt)
        if not retry:
            break
        failures = _run_groups(root, retry, index, worker_count, sort_offsets, buffer_size, report)

    found = report.found_targets
    report.verification_failures = sorted(
        (f for f in report.verification_failures if f.target not in found),
        key=lambda f: (f.target, f.location.source_file, f.location.byte_offset),
    )
    report.found.sort(key=_hit_order)
    report.stats.wall_time = time.perf_counter() - t0
    return report


def _run_groups(root, groups, index, worker_count, sort_offsets, buffer_size, report):
    jobs = []
    for fname in sorted(groups):
        tasks = groups[fname]
        if sort_offsets:
            tasks = sorted(tasks, key=lambda t: t.location.byte_offset)
        jobs.append((fname, tasks))
    if worker_count == 1 or len(jobs) <= 1:
        results = [_extract_file(root, fname, tasks, index, buffer_size) for fname, tasks in jobs]
    else:
        with ThreadPoolExecutor(max_workers=min(worker_count, len(jobs))) as pool:
            results = list(pool.map(lambda job: _extract_file(root, job[0], job[1], index, buffer_size), jobs))
    new_failures = []
    for hits, failures, stats in results:
        report.found.extend(hits)
        report.verification_failures.extend(failures)
        new_failures.extend(failures)
        report.stats.add(stats)
    return new_failures


def write_extraction_sdf(report: ExtractionReport, out) -> int:
    """Concatenate found records (ordered by target) into one SDF file.

    Records are written verbatim; a record that ended its source file
    without a final line terminator gets a ``\\n`` so the next one starts on
    its own line.
    """
    written = 0
    try:
        with open(out, "wb") as fh:
            for h in sorted(report.found, key=_hit_order):
                raw = h.record.raw
                if not raw.endswith(b"\n"):
                    raw += b"\n"
                fh.write(raw)
                written += len(raw)
    except OSError as exc:
        raise WriteFailure(f"cannot write {out}: {exc}") from exc
    return written


def write_report_json(report: ExtractionReport, out):
    try:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise WriteFailure(f"cannot write {out}: {exc}") from exc


def read_targets(path) -> list[str]:
    """One identifier per line; blank lines are skipped, order is kept."""
    with open(path, encoding="utf-8") as fh:
        return _unique(line.rstrip("\r\n") for line in fh if line.strip())

