"""``offsetforge`` command line.

Exit codes: 0 success, 1 operational error, 2 usage error.  Logs go to
stderr; data goes to files or stdout.  Defaults can be set through
``OFFSETFORGE_*`` environment variables and are overridden by flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass

from offsetforge import bench, corpus, cost, extraction, index, integrity
from offsetforge.errors import OffsetForgeError
from offsetforge.records import DEFAULT_BUFFER_SIZE

log = logging.getLogger("offsetforge")

ENV_PREFIX = "OFFSETFORGE_"


@dataclass
class GlobalConfig:
    log_level: str = "WARNING"
    workers: int = 1
    id_property: str = index.DEFAULT_ID_PROPERTY
    scheme: str = "full"
    buffer_size: int = DEFAULT_BUFFER_SIZE

    @classmethod
    def from_env(cls, environ=None):
        env = os.environ if environ is None else environ
        cfg = cls()
        for name, conv in (("log_level", str), ("workers", int), ("id_property", str),
                           ("scheme", str), ("buffer_size", int)):
            value = env.get(ENV_PREFIX + name.upper())
            if value:
                try:
                    setattr(cfg, name, conv(value))
                except ValueError:
                    raise UsageError(f"bad value for {ENV_PREFIX}{name.upper()}: {value!r}") from None
        return cfg

    def resolve(self, args):
        """Fill unset (None) flags on ``args`` from this config."""
        for name in ("log_level", "workers", "id_property", "scheme", "buffer_size"):
            if getattr(args, name, "absent") is None:
                setattr(args, name, getattr(self, name))
        return args


class UsageError(Exception):
    pass


def _scheme(text):
    try:
        return integrity.IdentifierScheme.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _counts(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None


def _read_id_list(path):
    with open(path, encoding="utf-8") as fh:
        return {line.rstrip("\r\n") for line in fh if line.strip()}


# -- subcommands -------------------------------------------------------------

def cmd_index(args):
    idx = index.build_index(args.dir, worker_count=args.workers, scheme=_scheme(args.scheme),
                            id_property=args.id_property, pattern=args.pattern, fail_fast=args.fail_fast)
    size = index.write_index_csv(idx, args.out)
    st = idx.build_stats
    log.info("indexed %d entries from %d files (%d records skipped), %d bytes",
             idx.entry_count, st.files_scanned, st.records_skipped, size)
    return 0


def cmd_extract(args):
    idx = index.load_index_csv(args.index)
    targets = extraction.read_targets(args.targets)
    report = extraction.indexed_extract(idx, args.dir, targets, worker_count=args.workers,
                                        sort_offsets=not args.no_sort,
                                        strict_fingerprint=args.strict_fingerprint,
                                        buffer_size=args.buffer_size)
    return _finish_extraction(report, args)


def cmd_scan(args):
    targets = extraction.read_targets(args.targets)
    report = extraction.baseline_scan(args.dir, targets, id_property=args.id_property, pattern=args.pattern)
    return _finish_extraction(report, args)


def _finish_extraction(report, args):
    extraction.write_extraction_sdf(report, args.out)
    if args.report:
        extraction.write_report_json(report, args.report)
    log.info("found %d, missing %d, verification failures %d",
             len(report.found), len(report.missing), len(report.verification_failures))
    return 0


def cmd_intersect(args):
    scheme = _scheme(args.scheme)
    lists = [_read_id_list(p) for p in args.lists]
    common = integrity.intersect_keys(lists, scheme)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.writelines(x + "\n" for x in common)
    log.info("%d identifiers in common", len(common))
    return 0


def cmd_audit(args):
    idx = index.load_index_csv(args.index)
    report = integrity.audit_collisions(idx)
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    log.info("%d colliding keys, %d colliding records, expected %.3g",
             report.colliding_key_count, report.colliding_record_count, report.expected_count)
    return 0


def cmd_estimate(args):
    params = cost.CostParams(
        n_targets=args.targets, n_files=args.files, avg_records_per_file=args.per_file,
        scan_rate=args.scan_rate,
        index_build_time=(args.index_hours or 0.0) * cost.SECONDS_PER_HOUR,
        per_lookup_time=(args.lookup_us or 0.0) * 1e-6,
    )
    ops = cost.brute_force_ops(params)
    hours = cost.brute_force_hours(ops, params.scan_rate)
    out = {"brute_force_ops": ops, "brute_force_hours": hours, "brute_force_days": hours / 24}
    if args.index_hours is not None:
        res = cost.crossover_targets(params, args.extractions)
        out["crossover"] = {
            "extractions_planned": res.extractions_planned,
            "threshold": res.threshold,
            "min_targets": res.min_targets,
        }
        if args.curve_out:
            cost.write_curve_csv(res, args.curve_out)
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_gen_corpus(args):
    spec = corpus.CorpusSpec(
        file_count=args.files, records_per_file=args.records, seed=args.seed,
        id_property=args.id_property, duplicate_fraction=args.dup_frac,
        line_terminator="CRLF" if args.crlf else "LF",
    )
    manifest = corpus.generate_corpus(spec, args.out, workers=args.workers)
    log.info("wrote %d records in %d files", len(manifest), spec.file_count)
    return 0


def cmd_bench(args):
    report = bench.run_benchmark(args.dir, args.targets, repetitions=args.reps, seed=args.seed,
                                 index_path=args.index, workers=args.workers,
                                 cold_cache=not args.no_cold_cache, buffer_size=args.buffer_size)
    bench.write_bench_report(report, args.out)
    if args.curve_out:
        bench.write_bench_curve(report, args.curve_out)
    return 0


# -- parser ------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", dest="log_level", default=None,
                        help="DEBUG, INFO, WARNING or ERROR (env OFFSETFORGE_LOG_LEVEL)")

    parser = argparse.ArgumentParser(prog="offsetforge", description="Index, extract and audit records in large SDF collections.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("index", parents=[common], help="build a byte-offset index over a directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=_positive, default=None)
    p.add_argument("--scheme", default=None, help="full or hashed:<bits>")
    p.add_argument("--id-property", dest="id_property", default=None)
    p.add_argument("--pattern", default=index.DEFAULT_PATTERN)
    p.add_argument("--fail-fast", action="store_true")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("extract", parents=[common], help="extract target records through an index")
    p.add_argument("--index", required=True)
    p.add_argument("--dir", required=True)
    p.add_argument("--targets", required=True, help="file with one identifier per line")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--workers", type=_positive, default=None)
    p.add_argument("--no-sort", action="store_true", help="keep target order instead of offset order")
    p.add_argument("--strict-fingerprint", action="store_true")
    p.add_argument("--buffer-size", dest="buffer_size", type=_positive, default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("scan", parents=[common], help="extract target records by sequential scan")
    p.add_argument("--dir", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--id-property", dest="id_property", default=None)
    p.add_argument("--pattern", default=index.DEFAULT_PATTERN)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("intersect", parents=[common], help="intersect identifier lists")
    p.add_argument("--lists", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scheme", default=None)
    p.set_defaults(func=cmd_intersect)

    p = sub.add_parser("audit", parents=[common], help="audit an index for hash-key collisions")
    p.add_argument("--index", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("estimate", parents=[common], help="brute-force and crossover projections")
    p.add_argument("--targets", type=int, required=True)
    p.add_argument("--files", type=int, required=True)
    p.add_argument("--per-file", dest="per_file", type=int, required=True)
    p.add_argument("--scan-rate", dest="scan_rate", type=float, required=True, help="records per second")
    p.add_argument("--index-hours", dest="index_hours", type=float)
    p.add_argument("--lookup-us", dest="lookup_us", type=float, help="per-target lookup cost in microseconds")
    p.add_argument("--extractions", type=_positive, default=1)
    p.add_argument("--curve-out", dest="curve_out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("gen-corpus", parents=[common], help="generate a seeded synthetic SDF corpus")
    p.add_argument("--files", type=int, required=True)
    p.add_argument("--records", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dup-frac", dest="dup_frac", type=float, default=0.0)
    p.add_argument("--crlf", action="store_true")
    p.add_argument("--id-property", dest="id_property", default=None)
    p.add_argument("--workers", type=_positive, default=None)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("bench", parents=[common], help="benchmark scan against indexed extraction")
    p.add_argument("--dir", required=True)
    p.add_argument("--targets", type=_counts, required=True, help="comma-separated target counts")
    p.add_argument("--reps", type=int, default=bench.MIN_REPETITIONS)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--curve-out", dest="curve_out")
    p.add_argument("--index", help="existing index CSV (built and timed when omitted)")
    p.add_argument("--workers", type=_positive, default=None)
    p.add_argument("--buffer-size", dest="buffer_size", type=_positive, default=None)
    p.add_argument("--no-cold-cache", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def dispatch(argv=None, environ=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        GlobalConfig.from_env(environ).resolve(args)
        if not isinstance(logging.getLevelName(args.log_level.upper()), int):
            raise UsageError(f"unknown log level {args.log_level!r}")
        if args.command in ("index", "intersect"):
            _scheme(args.scheme)
        if getattr(args, "reps", 3) < bench.MIN_REPETITIONS:
            raise UsageError(f"--reps must be at least {bench.MIN_REPETITIONS}")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"offsetforge: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        return args.func(args)
    except (OffsetForgeError, OSError, ValueError) as exc:
        print(f"offsetforge {args.command}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
