# %% [markdown]
# When does building an index pay off? The nested brute-force model charges
# every target a full pass; the indexed path pays a one-off build plus a tiny
# per-target lookup.

# %%
from offsetforge import CostParams, brute_force_hours, brute_force_ops, crossover_targets

params = CostParams(
    n_targets=477_123,
    n_files=354,
    avg_records_per_file=500_000,
    scan_rate=3200.0,
    index_build_time=11.7 * 3600,
    per_lookup_time=3.2 * 3600 / 477_123,
)
ops = brute_force_ops(params)
print(f"{ops:.4e} comparisons, {brute_force_hours(ops, params.scan_rate):,.0f} hours at {params.scan_rate:g}/s")

# %% [markdown]
# Under this model a single target already costs more than the build, so
# the break-even point sits below one target. Planning a second extraction
# halves it.

# %%
for k in (1, 2, 4):
    res = crossover_targets(params, extractions_planned=k)
    print(f"{k} extraction(s): break-even at {res.threshold:.3f} targets, index wins from {res.min_targets}")

# %% [markdown]
# A slower lookup moves the threshold out. The curve rows can be written
# to CSV for plotting.

# %%
cheap = CostParams(0, 10, 1000, 5000.0, index_build_time=600.0, per_lookup_time=1.5)
res = crossover_targets(cheap, curve_points=6)
print(res.threshold, res.min_targets)
for n, base, idx in res.curve:
    print(f"{n:6d} {base:10.1f} {idx:10.1f}")
