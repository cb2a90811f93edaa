# %% [markdown]
# Short hashed keys save space but let distinct identifiers collide. Here we
# shrink the key until collisions appear, audit them, and compare the count
# with the birthday approximation and with an exact expectation.

# %%
import random

import numpy as np

from offsetforge import (
    IdentifierScheme,
    audit_collisions,
    expected_collision_groups_exact,
    expected_collisions,
    hash_key,
    intersect,
    intersect_keys,
    simulate_collision_groups,
)
from offsetforge.index import PersistentIndex
from offsetforge.records import RecordLocation

rng = random.Random(0)
ids = [f"InChI=1S/C{rng.randint(1, 40)}H{rng.randint(1, 80)}/c{i}-{rng.getrandbits(32):x}" for i in range(5000)]


def index_under(scheme):
    entries = {}
    for i, full in enumerate(ids):
        entries.setdefault(hash_key(full, scheme), []).append((RecordLocation("ids.sdf", i), full))
    return PersistentIndex(entries, scheme)


# %%
for bits in (32, 24, 20, 16):
    report = audit_collisions(index_under(IdentifierScheme.hashed(bits)))
    exact = expected_collision_groups_exact(len(ids), 2.0**bits)
    print(f"{bits:2d} bits: {report.colliding_key_count:4d} groups, {report.colliding_record_count:4d} records, "
          f"n^2/2h = {report.expected_count:8.2f}, exact = {exact:8.2f}")

# %% [markdown]
# The uniform-hash simulation agrees with the exact expectation.

# %%
sims = simulate_collision_groups(len(ids), 20, trials=500, seed=1)
print("simulated mean:", sims.mean(), "+/-", sims.std(ddof=1) / np.sqrt(len(sims)))
print("exact:", expected_collision_groups_exact(len(ids), 2.0**20))
print("approximation:", expected_collisions(len(ids), 2.0**20))

# %% [markdown]
# Intersecting sources by hashed key overcounts whenever a collision pairs
# an identifier from one source with a different one from another.

# %%
scheme = IdentifierScheme.hashed(16)
a, b = set(ids[:3000]), set(ids[2000:])
print("full identifiers in common:", len(intersect(a, b)))
print("hashed keys in common:", len(intersect_keys([a, b], scheme)))
