"""Byte-offset indexing, seek extraction and identifier-collision auditing for SDF corpora."""

from offsetforge.errors import (
    DomainError,
    FingerprintMismatch,
    FormatError,
    MalformedRecord,
    NoCrossover,
    OffsetForgeError,
    SeekOutOfRange,
    UnreadableFile,
)
from offsetforge.records import MoleculeRecord, RecordLocation, get_property, read_record_at, stream_records
from offsetforge.integrity import (
    CollisionReport,
    IdentifierScheme,
    audit_collisions,
    collision_rate,
    expected_collision_groups_exact,
    expected_collisions,
    hash_key,
    intersect,
    intersect_keys,
    migrate_scheme,
    simulate_collision_groups,
)
from offsetforge.index import IndexEntry, PersistentIndex, build_index, load_index_csv, verify_index, write_index_csv
from offsetforge.extraction import ExtractionReport, baseline_scan, indexed_extract, write_extraction_sdf
from offsetforge.cost import CostParams, brute_force_hours, brute_force_ops, crossover_targets
from offsetforge.corpus import CorpusSpec, generate_corpus

__version__ = "0.1.0"
