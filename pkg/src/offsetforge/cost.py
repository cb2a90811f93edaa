"""Analytic cost projections for brute-force lookup versus index-then-seek.

The brute-force projection uses the nested model (every target scans every
record of every file), not the single-pass scan that ``baseline_scan``
actually runs; it exists to project archive-scale runtimes that are never
executed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from offsetforge.errors import DomainError, NoCrossover

SECONDS_PER_HOUR = 3600.0


@dataclass
class CostParams:
    n_targets: int = 0
    n_files: int = 0
    avg_records_per_file: int = 0
    scan_rate: float = 0.0  # records per second
    index_build_time: float = 0.0  # seconds
    per_lookup_time: float = 0.0  # seconds per target

    @property
    def per_target_baseline_cost(self) -> float:
        """Seconds a nested scan spends on one target: M * S / rate."""
        if self.scan_rate <= 0:
            raise DomainError("scan_rate must be positive")
        return self.n_files * self.avg_records_per_file / self.scan_rate


def brute_force_ops(params: CostParams) -> float:
    return float(params.n_targets) * params.n_files * params.avg_records_per_file


def brute_force_hours(ops: float, scan_rate: float) -> float:
    if scan_rate <= 0:
        raise DomainError("scan_rate must be positive")
    return ops / (scan_rate * SECONDS_PER_HOUR)


@dataclass
class CrossoverResult:
    threshold: float  # break-even target count (continuous)
    min_targets: int  # smallest whole target count at which indexing is strictly cheaper
    extractions_planned: int
    curve: list[tuple[int, float, float]]  # (targets, baseline seconds, indexed seconds)


def baseline_cost(params: CostParams, n_targets: float, extractions: int = 1) -> float:
    return extractions * n_targets * params.per_target_baseline_cost


def indexed_cost(params: CostParams, n_targets: float, extractions: int = 1) -> float:
    return params.index_build_time + extractions * n_targets * params.per_lookup_time


def crossover_targets(params: CostParams, extractions_planned: int = 1,
                      curve_points: int = 50) -> CrossoverResult:
    """Target count above which building the index pays off.

    Solves ``K*N*b = I + K*N*l`` for N, with b the nested per-target scan
    cost, l the per-target lookup cost, I the one-off build time and K the
    number of planned extractions.  The curve spans 0..2x the threshold
    (or 0..n_targets when that is larger).
    """
    if extractions_planned < 1:
        raise DomainError("extractions_planned must be >= 1")
    if params.index_build_time < 0 or params.per_lookup_time < 0:
        raise DomainError("costs must be non-negative")
    b = params.per_target_baseline_cost
    margin = b - params.per_lookup_time
    if margin <= 0:
        raise NoCrossover(
            f"per-target lookup ({params.per_lookup_time:g}s) is not cheaper than scanning ({b:g}s)"
        )
    threshold = params.index_build_time / (extractions_planned * margin)
    min_targets = math.floor(threshold) + 1

    top = max(2 * threshold, params.n_targets, 1)
    step = top / max(curve_points - 1, 1)
    xs = sorted({int(round(i * step)) for i in range(curve_points)})
    curve = [
        (x, baseline_cost(params, x, extractions_planned), indexed_cost(params, x, extractions_planned))
        for x in xs
    ]
    return CrossoverResult(threshold, min_targets, extractions_planned, curve)


def write_curve_csv(result: CrossoverResult, out):
    with open(out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["targets", "baseline_seconds", "indexed_seconds"])
        w.writerows(result.curve)
