"""Benchmark harness: baseline scan versus indexed extraction on a generated corpus."""

from __future__ import annotations

import csv
import gc
import json
import logging
import os
import random
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from offsetforge.corpus import MANIFEST_NAME, load_manifest
from offsetforge.errors import CorpusMissing, IndexMissing
from offsetforge.extraction import baseline_scan, indexed_extract
from offsetforge.index import build_index, list_record_files, load_index_csv, write_index_csv
from offsetforge.integrity import FULL
from offsetforge.records import DEFAULT_BUFFER_SIZE

log = logging.getLogger(__name__)

MIN_REPETITIONS = 3


@dataclass
class BenchRow:
    method: str  # "baseline" or "indexed"
    target_count: int
    phase: str  # "initial" or "re-extraction"
    wall_times: list[float]
    bytes_read: int
    files_opened: int
    seeks: int
    records_found: int
    index_rebuilt: bool = False  # the index used carried build counters, i.e. was built rather than loaded

    @property
    def wall_time_mean(self):
        return statistics.fmean(self.wall_times)

    @property
    def wall_time_std(self):
        return statistics.stdev(self.wall_times) if len(self.wall_times) > 1 else 0.0

    @property
    def throughput(self):
        """Target records delivered per second of mean wall time."""
        t = self.wall_time_mean
        return self.records_found / t if t > 0 else float("inf")

    def to_dict(self):
        d = asdict(self)
        d.update(wall_time_mean=self.wall_time_mean, wall_time_std=self.wall_time_std,
                 throughput=self.throughput)
        return d


@dataclass
class BenchReport:
    corpus_dir: str
    corpus_bytes: int
    record_count: int
    seed: int
    repetitions: int
    index_build_time: float | None
    index_load_time: float
    index_entry_count: int
    cold_cache_attempted: bool
    rows: list[BenchRow] = field(default_factory=list)

    def row(self, method, target_count, phase="initial"):
        for r in self.rows:
            if (r.method, r.target_count, r.phase) == (method, target_count, phase):
                return r
        raise KeyError((method, target_count, phase))

    def speedup(self, target_count) -> float:
        base = self.row("baseline", target_count).wall_time_mean
        idx = self.row("indexed", target_count).wall_time_mean
        return base / idx if idx > 0 else float("inf")

    def bytes_ratio(self, target_count) -> float:
        base = self.row("baseline", target_count).bytes_read
        idx = self.row("indexed", target_count).bytes_read
        return idx / base if base else 0.0

    def to_dict(self):
        counts = sorted({r.target_count for r in self.rows if r.phase == "initial"})
        return {
            "corpus_dir": self.corpus_dir,
            "corpus_bytes": self.corpus_bytes,
            "record_count": self.record_count,
            "seed": self.seed,
            "repetitions": self.repetitions,
            "index_build_time": self.index_build_time,
            "index_load_time": self.index_load_time,
            "index_entry_count": self.index_entry_count,
            "cold_cache_attempted": self.cold_cache_attempted,
            "rows": [r.to_dict() for r in self.rows],
            "speedup": {str(n): self.speedup(n) for n in counts},
            "bytes_read_ratio": {str(n): self.bytes_ratio(n) for n in counts},
        }


def drop_file_cache(paths) -> bool:
    """Ask the kernel to evict the files' pages.  Best effort, Linux only."""
    if not hasattr(os, "posix_fadvise"):
        return False
    for p in paths:
        try:
            fd = os.open(p, os.O_RDONLY)
        except OSError:
            continue
        try:
            os.posix_fadvise(fd, 0, 0, os.POSIX_FADV_DONTNEED)
        except OSError:
            return False
        finally:
            os.close(fd)
    return True


def sample_targets(manifest, count: int, seed: int, exclude=()) -> list[str]:
    exclude = set(exclude)
    pool = [i for i in manifest.identifiers() if i not in exclude]
    if count > len(pool):
        raise ValueError(f"asked for {count} targets, corpus has {len(pool)} eligible identifiers")
    return sorted(random.Random(seed).sample(pool, count))


def run_benchmark(corpus_dir, target_counts, repetitions: int = MIN_REPETITIONS, seed: int = 0,
                  index_path=None, workers: int = 1, cold_cache: bool = True,
                  buffer_size: int = DEFAULT_BUFFER_SIZE, reextract: bool = True) -> BenchReport:
    """Time both methods for each target count.

    Without ``index_path`` the index is built once (timed separately) and
    written next to the corpus as ``<corpus>.index.csv``, or reused if that
    file already exists.  An explicit ``index_path`` must exist.
    Extraction always runs against the index as reloaded from CSV.  With
    ``reextract`` the largest target count is extracted a second time with
    a disjoint seeded target set, against the same loaded index and without
    any rebuild.
    """
    corpus = Path(corpus_dir)
    manifest_path = corpus / MANIFEST_NAME
    if not corpus.is_dir() or not manifest_path.exists():
        raise CorpusMissing(f"{corpus} holds no generated corpus (missing {MANIFEST_NAME})")
    if repetitions < MIN_REPETITIONS:
        raise ValueError(f"repetitions must be >= {MIN_REPETITIONS}")
    manifest = load_manifest(manifest_path)
    names = list_record_files(corpus)
    paths = [corpus / n for n in names]

    build_time = None
    if index_path is None:
        index_path = corpus.parent / f"{corpus.name}.index.csv"
        if not Path(index_path).exists():
            built = build_index(corpus, worker_count=workers, scheme=FULL)
            build_time = built.build_stats.wall_time
            write_index_csv(built, index_path)
            del built
    elif not Path(index_path).exists():
        raise IndexMissing(f"index {index_path} does not exist")

    t0 = time.perf_counter()
    index = load_index_csv(index_path)
    load_time = time.perf_counter() - t0

    report = BenchReport(
        corpus_dir=os.fspath(corpus),
        corpus_bytes=sum(p.stat().st_size for p in paths),
        record_count=len(manifest),
        seed=seed,
        repetitions=repetitions,
        index_build_time=build_time,
        index_load_time=load_time,
        index_entry_count=index.entry_count,
        cold_cache_attempted=cold_cache,
    )

    def timed(method, targets, count, phase):
        times = []
        first = None
        for _ in range(repetitions):
            if cold_cache:
                drop_file_cache(paths)
            # a full collection walks every loaded index entry; keep it out of the timings
            gc.collect()
            gc.disable()
            try:
                if method == "baseline":
                    res = baseline_scan(corpus, targets)
                else:
                    res = indexed_extract(index, corpus, targets, worker_count=workers, buffer_size=buffer_size)
            finally:
                gc.enable()
            times.append(res.stats.wall_time)
            if first is None:
                first = res
        s = first.stats
        row = BenchRow(method, count, phase, times, s.bytes_read, s.files_opened, s.seeks_performed,
                       len(first.found), method == "indexed" and index.build_stats is not None)
        report.rows.append(row)
        log.info("%s %s n=%d: %.4fs", phase, method, count, row.wall_time_mean)
        return first

    for i, count in enumerate(target_counts):
        targets = sample_targets(manifest, count, seed + i)
        timed("baseline", targets, count, "initial")
        timed("indexed", targets, count, "initial")

    if reextract and target_counts:
        count = max(target_counts)
        first = sample_targets(manifest, count, seed + target_counts.index(count))
        second = sample_targets(manifest, count, seed + 10_000, exclude=first)
        timed("indexed", second, count, "re-extraction")
    return report


def write_bench_report(report: BenchReport, out):
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


def write_bench_curve(report: BenchReport, out):
    with open(out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "phase", "target_count", "wall_time_mean", "wall_time_std", "bytes_read"])
        for r in report.rows:
            w.writerow([r.method, r.phase, r.target_count, f"{r.wall_time_mean:.6f}",
                        f"{r.wall_time_std:.6f}", r.bytes_read])
