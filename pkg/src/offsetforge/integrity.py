"""Identifier schemes, n-way intersection and hash-collision auditing.

Two schemes are supported.  ``full`` keys a record by its canonical
identifier string itself and is collision-free by construction.
``hashed:<bits>`` keys it by the leading ``bits`` of the identifier's
SHA-256 digest, which is a stand-in for fixed-width chemical hash keys
with a tunable key space so that birthday collisions show up at small n.
"""

from __future__ import annotations

import hashlib
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from offsetforge.errors import DomainError
from offsetforge.records import RecordLocation

MAX_HASH_BITS = 256


@dataclass(frozen=True)
class IdentifierScheme:
    kind: str = "full"
    hash_bits: int | None = None

    def __post_init__(self):
        if self.kind == "full":
            if self.hash_bits is not None:
                raise ValueError("the full scheme takes no hash_bits")
        elif self.kind == "hashed":
            if not isinstance(self.hash_bits, int) or not 1 <= self.hash_bits <= MAX_HASH_BITS:
                raise ValueError(f"hash_bits must be an integer in 1..{MAX_HASH_BITS}")
        else:
            raise ValueError(f"unknown scheme kind {self.kind!r}")

    @classmethod
    def full(cls):
        return cls("full")

    @classmethod
    def hashed(cls, bits: int):
        return cls("hashed", bits)

    @classmethod
    def parse(cls, text: str) -> "IdentifierScheme":
        """Parse ``full`` or ``hashed:<bits>``."""
        text = text.strip()
        if text == "full":
            return cls.full()
        kind, sep, bits = text.partition(":")
        if kind == "hashed" and sep:
            try:
                return cls.hashed(int(bits))
            except ValueError:
                pass
        raise ValueError(f"invalid identifier scheme {text!r}; expected full or hashed:<bits>")

    @property
    def is_full(self):
        return self.kind == "full"

    @property
    def hash_space(self) -> float:
        return math.inf if self.is_full else float(2**self.hash_bits)

    def key(self, full_identifier: str) -> str:
        return hash_key(full_identifier, self)

    def __str__(self):
        return "full" if self.is_full else f"hashed:{self.hash_bits}"


FULL = IdentifierScheme.full()


def hash_key(full_identifier: str, scheme: IdentifierScheme) -> str:
    """Key of ``full_identifier`` under ``scheme``.

    Hashed keys are the top ``hash_bits`` bits of SHA-256 over the UTF-8
    bytes, as zero-padded lowercase hex of ``ceil(bits / 4)`` digits.
    """
    if scheme.is_full:
        return full_identifier
    bits = scheme.hash_bits
    digest = int.from_bytes(hashlib.sha256(full_identifier.encode("utf-8")).digest(), "big")
    return format(digest >> (MAX_HASH_BITS - bits), f"0{(bits + 3) // 4}x")


def intersect(*id_lists) -> list[str]:
    """Exact n-way intersection, returned in lexicographic order."""
    if len(id_lists) == 1 and not isinstance(id_lists[0], (set, frozenset)):
        id_lists = tuple(id_lists[0])
    if len(id_lists) < 2:
        raise ValueError("intersect needs at least two identifier sets")
    sets = sorted((set(s) for s in id_lists), key=len)
    common = sets[0]
    for s in sets[1:]:
        common = common & s
    return sorted(common)


def intersect_keys(id_lists, scheme: IdentifierScheme) -> list[str]:
    """Intersect after mapping every identifier to its key under ``scheme``.

    Under a hashed scheme two distinct identifiers that share a key count as
    a match: the key of every true match is returned, possibly alongside
    false ones.
    """
    return intersect([{hash_key(x, scheme) for x in ids} for ids in id_lists])


def expected_collisions(n: float, hash_space: float) -> float:
    """Birthday approximation ``n**2 / (2 * h)`` for n keys drawn from h values."""
    if not hash_space > 0:
        raise DomainError("hash space must be positive")
    if n < 0:
        raise DomainError("n must be non-negative")
    if math.isinf(hash_space):
        return 0.0
    return n * n / (2.0 * hash_space)


def expected_collision_groups_exact(n: int, hash_space: float) -> float:
    """Exact expected number of occupied buckets holding two or more keys.

    With n keys uniform over h buckets each bucket is empty with probability
    ``(1-1/h)**n`` and holds exactly one key with ``n/h * (1-1/h)**(n-1)``.
    """
    if not hash_space > 0:
        raise DomainError("hash space must be positive")
    if n < 2 or math.isinf(hash_space):
        return 0.0
    h = float(hash_space)
    log_q = math.log1p(-1.0 / h)
    p_empty = math.exp(n * log_q)
    p_single = n / h * math.exp((n - 1) * log_q)
    return h * (1.0 - p_empty - p_single)


def collision_rate(colliding_records: int, total_entries: int) -> float:
    if total_entries <= 0:
        raise DomainError("total_entries must be positive")
    if not 0 <= colliding_records <= total_entries:
        raise DomainError("colliding_records must lie in [0, total_entries]")
    return colliding_records / total_entries


def simulate_collision_groups(n: int, bits: int, trials: int, seed: int = 0) -> np.ndarray:
    """Collision-group counts from ``trials`` draws of n uniform ``bits``-bit keys."""
    rng = np.random.default_rng(seed)
    out = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        keys = rng.integers(0, 2**bits, size=n, dtype=np.uint64)
        _, counts = np.unique(keys, return_counts=True)
        out[t] = int(np.count_nonzero(counts >= 2))
    return out


@dataclass
class CollisionGroup:
    key: str
    members: list[tuple[str, RecordLocation]]

    @property
    def distinct_identifiers(self):
        return [full for full, _ in self.members]


@dataclass
class CollisionReport:
    scheme: IdentifierScheme
    collision_groups: list[CollisionGroup] = field(default_factory=list)
    scanned_entry_count: int = 0
    distinct_identifier_count: int = 0
    duplicate_record_count: int = 0
    expected_count: float = 0.0

    @property
    def colliding_key_count(self):
        return len(self.collision_groups)

    @property
    def colliding_record_count(self):
        return sum(len(g.members) for g in self.collision_groups)

    @property
    def observed_rate(self):
        if self.scanned_entry_count == 0:
            return 0.0
        return collision_rate(self.colliding_record_count, self.scanned_entry_count)

    @property
    def excess_ratio(self):
        """Observed collision groups over the birthday expectation (nan when nothing is expected)."""
        if self.expected_count == 0:
            return math.nan
        return self.colliding_key_count / self.expected_count

    def to_dict(self):
        return {
            "scheme": str(self.scheme),
            "scanned_entry_count": self.scanned_entry_count,
            "distinct_identifier_count": self.distinct_identifier_count,
            "colliding_key_count": self.colliding_key_count,
            "colliding_record_count": self.colliding_record_count,
            "duplicate_record_count": self.duplicate_record_count,
            "observed_rate": self.observed_rate,
            "expected_count": self.expected_count,
            "excess_ratio": None if math.isnan(self.excess_ratio) else self.excess_ratio,
            "groups": [
                {
                    "key": g.key,
                    "members": [
                        {"full_identifier": full, "filename": loc.source_file, "byte_offset": loc.byte_offset}
                        for full, loc in g.members
                    ],
                }
                for g in self.collision_groups
            ],
        }


def group_collisions(entries):
    """Group ``(key, full_identifier, location)`` entries by key.

    Returns the collision groups (keys carrying at least two distinct full
    identifiers, each identifier listed once at its first location) and the
    number of entries that merely repeat an identifier already seen under
    the same key.
    """
    by_key: dict[str, dict[str, RecordLocation]] = defaultdict(dict)
    duplicates = 0
    for key, full, loc in entries:
        members = by_key[key]
        if full in members:
            duplicates += 1
        else:
            members[full] = loc
    groups = [
        CollisionGroup(key, sorted(members.items(), key=lambda m: (m[0], tuple(m[1]))))
        for key, members in by_key.items()
        if len(members) >= 2
    ]
    groups.sort(key=lambda g: g.key)
    return groups, duplicates


def audit_collisions(index) -> CollisionReport:
    """Scan a persistent index for keys shared by distinct full identifiers.

    Repeated records of one identifier are tallied in
    ``duplicate_record_count`` and never form a group.  The birthday
    expectation uses the number of distinct identifiers as n.
    """
    scheme = index.scheme
    groups, duplicates = group_collisions((key, full, loc) for key, loc, full in index.iter_entries())
    distinct = index.entry_count - duplicates
    return CollisionReport(
        scheme=scheme,
        collision_groups=groups,
        scanned_entry_count=index.entry_count,
        distinct_identifier_count=distinct,
        duplicate_record_count=duplicates,
        expected_count=expected_collisions(distinct, scheme.hash_space),
    )


def migrate_scheme(index, target: IdentifierScheme):
    """Re-key an index under ``target``, keeping every entry and its full identifier."""
    migrated = index.rekeyed(target)
    return migrated, audit_collisions(migrated)
