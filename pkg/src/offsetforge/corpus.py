"""Deterministic synthetic SDF corpora with a ground-truth manifest.

Every byte of a corpus is a function of its :class:`CorpusSpec`.  Each
file draws from its own generator seeded from the master seed, so files
can be produced in any order or in parallel.  Identifiers look like InChI
strings (``InChI=1S/<formula>/c.../h...``) and often contain commas.
"""

from __future__ import annotations

import bisect
import csv
import hashlib
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from offsetforge.errors import OutputDirNotEmpty, WriteFailure
from offsetforge.index import DEFAULT_ID_PROPERTY

MANIFEST_NAME = "manifest.csv"
MANIFEST_HEADER = ["identifier", "filename", "byte_offset", "byte_length"]

_FILLER = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789 .-+=()"
_TRANSLATE = bytes(_FILLER[i % len(_FILLER)] for i in range(256))
_FILLER_WIDTH = 72


@dataclass(frozen=True)
class CorpusSpec:
    file_count: int = 2
    records_per_file: int = 3
    seed: int = 0
    id_property: str = DEFAULT_ID_PROPERTY
    identifier_length_range: tuple[int, int] = (60, 200)
    record_body_size_range: tuple[int, int] = (200, 1200)
    duplicate_fraction: float = 0.0
    line_terminator: str = "LF"
    missing_id_fraction: float = 0.0

    def __post_init__(self):
        if self.file_count < 0 or self.records_per_file < 0:
            raise ValueError("file_count and records_per_file must be non-negative")
        for name in ("identifier_length_range", "record_body_size_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or lo > hi:
                raise ValueError(f"{name} must be a non-empty range")
        for name in ("duplicate_fraction", "missing_id_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.line_terminator not in ("LF", "CRLF"):
            raise ValueError("line_terminator must be LF or CRLF")

    def filename(self, file_index: int) -> str:
        return f"Compound_{file_index:05d}.sdf"


@dataclass(frozen=True)
class ManifestEntry:
    identifier: str  # empty when the record carries no identifier property
    filename: str
    byte_offset: int
    byte_length: int


class Manifest(list):
    """Ground-truth list of every generated record, in file then offset order."""

    def first_occurrences(self) -> dict[str, ManifestEntry]:
        out = {}
        for e in self:
            if e.identifier and e.identifier not in out:
                out[e.identifier] = e
        return out

    def identifiers(self) -> list[str]:
        return sorted({e.identifier for e in self if e.identifier})

    def duplicate_count(self) -> int:
        """Records whose identifier already appeared earlier in the corpus."""
        with_id = [e for e in self if e.identifier]
        return len(with_id) - len({e.identifier for e in with_id})


def _derive(seed: int, *parts) -> int:
    text = ":".join(str(p) for p in (seed,) + parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def base_identifier(spec: CorpusSpec, serial: int) -> tuple[str, str]:
    """The identifier (and formula) owned by record position ``serial``.

    Unique per serial because the connectivity layer opens with it.
    """
    rng = random.Random(_derive(spec.seed, "id", serial))
    c = rng.randint(1, 60)
    formula = f"C{c}H{rng.randint(0, 2 * c + 2)}"
    if rng.random() < 0.6:
        formula += f"N{rng.randint(1, 8)}"
    if rng.random() < 0.7:
        formula += f"O{rng.randint(1, 10)}"
    ident = f"InChI=1S/{formula}/c{serial}-{rng.randint(1, c + 9)}"
    lo, hi = spec.identifier_length_range
    target = rng.randint(lo, hi)
    with_commas = rng.random() < 0.6
    while len(ident) < target:
        roll = rng.random()
        if roll < 0.5:
            ident += f"-{rng.randint(1, c + 9)}({rng.randint(1, c + 9)})"
        elif with_commas:
            ident += f"/h{rng.randint(1, c)}H,{rng.randint(1, c)}H2,{rng.randint(1, c)}H3"
        else:
            ident += f"/t{rng.randint(1, c)}-{rng.randint(1, c)}"
    if len(ident) > target:
        ident = ident[: max(target, ident.index("-") + 1)]
    return ident, formula


def _serial(spec: CorpusSpec, file_index: int, record_index: int) -> int:
    return file_index * spec.records_per_file + record_index


@lru_cache(maxsize=256)
def _flags(spec: CorpusSpec, file_index: int):
    """(duplicate flags, missing-id flags, sorted non-duplicate indices) of one file."""
    rng = random.Random(_derive(spec.seed, "flags", file_index))
    dup, missing = [], []
    for _ in range(spec.records_per_file):
        dup.append(rng.random() < spec.duplicate_fraction)
        missing.append(rng.random() < spec.missing_id_fraction)
    originals = [i for i, d in enumerate(dup) if not d]
    return dup, missing, originals


def _duplicate_source(spec: CorpusSpec, rng: random.Random, file_index: int, record_index: int):
    """Serial of an earlier original record to copy an identifier from, or None."""
    src_file = rng.randint(0, file_index)
    for f in (src_file, file_index):
        originals = _flags(spec, f)[2]
        limit = bisect.bisect_left(originals, record_index) if f == file_index else len(originals)
        if limit:
            return _serial(spec, f, originals[rng.randrange(limit)])
    return None


def _record_bytes(spec: CorpusSpec, rng: random.Random, serial: int, identifier: str | None,
                  formula: str) -> bytes:
    lo, hi = spec.record_body_size_range
    body = rng.randbytes(rng.randint(lo, hi)).translate(_TRANSLATE)
    lines = [f"OF-{serial}".encode(), f"  offsetforge {spec.seed}".encode(), b""]
    for i in range(0, len(body), _FILLER_WIDTH):
        lines.append(b"F " + body[i : i + _FILLER_WIDTH])
    lines.append(b"M  END")
    props = [("PUBCHEM_COMPOUND_CID", str(serial + 1))]
    if identifier is not None:
        props.append((spec.id_property, identifier))
    props.append(("PUBCHEM_MOLECULAR_FORMULA", formula))
    for name, value in props:
        lines += [f"> <{name}>".encode(), value.encode(), b""]
    lines.append(b"$$$$")
    nl = b"\r\n" if spec.line_terminator == "CRLF" else b"\n"
    return nl.join(lines) + nl


def generate_file(spec: CorpusSpec, file_index: int, out_dir) -> list[ManifestEntry]:
    """Write one corpus file and return its manifest rows."""
    name = spec.filename(file_index)
    rng = random.Random(_derive(spec.seed, "file", file_index))
    dup, missing, _ = _flags(spec, file_index)
    chunks = []
    rows = []
    offset = 0
    for r in range(spec.records_per_file):
        serial = _serial(spec, file_index, r)
        ident, formula = base_identifier(spec, serial)
        if dup[r]:
            src = _duplicate_source(spec, rng, file_index, r)
            if src is not None:
                ident, formula = base_identifier(spec, src)
        if missing[r]:
            ident = None
        raw = _record_bytes(spec, rng, serial, ident, formula)
        chunks.append(raw)
        rows.append(ManifestEntry(ident or "", name, offset, len(raw)))
        offset += len(raw)
    try:
        Path(out_dir, name).write_bytes(b"".join(chunks))
    except OSError as exc:
        raise WriteFailure(f"cannot write {name}: {exc}") from exc
    return rows


def _generate_task(args):
    return generate_file(*args)


def generate_corpus(spec: CorpusSpec, out_dir, workers: int = 1) -> Manifest:
    """Write ``spec.file_count`` SDF files plus ``manifest.csv`` into ``out_dir``."""
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()):
        raise OutputDirNotEmpty(f"{out} is not empty")
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(spec, f, out) for f in range(spec.file_count)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_generate_task, tasks))
    else:
        parts = [_generate_task(t) for t in tasks]
    manifest = Manifest(row for part in parts for row in part)
    write_manifest(manifest, out / MANIFEST_NAME)
    return manifest


def write_manifest(manifest, path):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(MANIFEST_HEADER)
            w.writerows((e.identifier, e.filename, e.byte_offset, e.byte_length) for e in manifest)
    except OSError as exc:
        raise WriteFailure(f"cannot write manifest {path}: {exc}") from exc


def load_manifest(path) -> Manifest:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ValueError(f"{path}: not a corpus manifest")
        return Manifest(ManifestEntry(i, f, int(o), int(n)) for i, f, o, n in reader)
