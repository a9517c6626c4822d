"""Replicated generation and estimation over a scenario x n x estimator grid.

Every replication draws from its own generator, seeded by
:func:`derive_rep_seed` from the master seed and the cell coordinates, so
results do not depend on how replications are split across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dgp import BLOCKS, ScenarioConfig, scoring_ace, simulate_arrays
from .errors import InputError, NumericalError
from .ivest import Z_975, IvKind, tsls_arrays, wald_arrays

MASK64 = (1 << 64) - 1
MIN_N = 30
#: Share of failed replications above which a cell is flagged unreliable.
FAILURE_FLAG_SHARE = 0.01
DEFAULT_CHUNK = 250
# Rows of the confounder bit array holding the simulation modifiers.
U6_ROW = 2 * BLOCKS.index(6)
V6_ROW = U6_ROW + 1


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 generator, used as a 64-bit mixer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_rep_seed(master_seed: int, scenario: int, n: int, spec, rep_index: int) -> int:
    """64-bit seed for one replication, mixed from its grid coordinates."""
    spec_index = spec.index if isinstance(spec, IvKind) else int(spec)
    h = splitmix64(int(master_seed) & MASK64)
    for part in (int(scenario), int(n), spec_index, int(rep_index)):
        h = splitmix64(h ^ (part & MASK64))
    return h


@dataclass(frozen=True)
class CellDraws:
    """Per-replication estimates for one cell; NaN marks a failed fit."""

    seeds: np.ndarray
    points: np.ndarray
    ses: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return np.isfinite(self.points) & np.isfinite(self.ses)

    @property
    def ci_low(self) -> np.ndarray:
        return self.points - Z_975 * self.ses

    @property
    def ci_high(self) -> np.ndarray:
        return self.points + Z_975 * self.ses


@dataclass(frozen=True)
class McSummary:
    scenario: str
    n: int
    spec: IvKind
    ace: float
    median_bias: float
    median_se: float
    coverage: float
    rejection_rate: float
    reps_used: int
    reps_failed: int

    @property
    def reps(self) -> int:
        return self.reps_used + self.reps_failed

    @property
    def unreliable(self) -> bool:
        return self.reps_failed > FAILURE_FLAG_SHARE * self.reps


@dataclass(frozen=True)
class McConfig:
    scenarios: Sequence[ScenarioConfig]
    sample_sizes: Sequence[int]
    specs: Sequence[IvKind]
    reps: int
    master_seed: int = 0
    workers: int = 1
    chunk: int = field(default=DEFAULT_CHUNK, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "specs", tuple(IvKind.parse(s) for s in self.specs))
        if not self.scenarios or not self.sample_sizes or not self.specs:
            raise InputError("the grid needs at least one scenario, sample size and estimator")
        if self.reps < 1:
            raise InputError("reps must be at least 1")
        if min(self.sample_sizes) < MIN_N:
            raise InputError(f"sample sizes must be at least {MIN_N}")
        if self.workers < 1:
            raise InputError("workers must be at least 1")
        if self.chunk < 1:
            raise InputError("chunk must be at least 1")

    def cells(self):
        """(scenario, n, spec) triples in output order."""
        return [(s, n, k) for s in self.scenarios for n in self.sample_sizes for k in self.specs]


def _simulate_chunk(task) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    config, n, kind, master_seed, start, stop = task
    cfg = config.with_n(n)
    key = config.seed_key()
    m = stop - start
    seeds = np.empty(m, dtype=np.uint64)
    points = np.full(m, np.nan)
    ses = np.full(m, np.nan)
    for j in range(m):
        seed = derive_rep_seed(master_seed, key, n, kind, start + j)
        seeds[j] = seed
        z, x, y, bits = simulate_arrays(cfg, seed)
        try:
            if kind is IvKind.WALD:
                point, se = wald_arrays(z, x, y)
            else:
                point, se = tsls_arrays(y, x, z, bits[U6_ROW], bits[V6_ROW], kind)
        except NumericalError:
            continue
        points[j] = point
        ses[j] = se
    return seeds, points, ses


def _chunks(reps: int, size: int):
    return [(a, min(a + size, reps)) for a in range(0, reps, size)]


def _run_tasks(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_simulate_chunk(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_simulate_chunk, tasks))


def _join(parts) -> CellDraws:
    seeds, points, ses = zip(*parts)
    return CellDraws(np.concatenate(seeds), np.concatenate(points), np.concatenate(ses))


def simulate_cell(
    scenario: ScenarioConfig,
    n: int,
    spec,
    reps: int,
    master_seed: int,
    workers: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> CellDraws:
    kind = IvKind.parse(spec)
    tasks = [(scenario, n, kind, master_seed, a, b) for a, b in _chunks(reps, chunk)]
    return _join(_run_tasks(tasks, workers))


def summarize(scenario: ScenarioConfig, n: int, spec, draws: CellDraws, ace: float | None = None) -> McSummary:
    """Median bias, median SE, coverage of ``ace`` and rejection of zero.

    Failed replications are excluded from every metric and counted.
    """
    if ace is None:
        ace = scoring_ace(scenario)
    ok = draws.ok
    used = int(ok.sum())
    failed = int(ok.size - used)
    if used == 0:
        nan = math.nan
        return McSummary(scenario.label, n, IvKind.parse(spec), ace, nan, nan, nan, nan, 0, failed)
    p, lo, hi = draws.points[ok], draws.ci_low[ok], draws.ci_high[ok]
    return McSummary(
        scenario=scenario.label,
        n=int(n),
        spec=IvKind.parse(spec),
        ace=float(ace),
        median_bias=float(np.median(p) - ace),
        median_se=float(np.median(draws.ses[ok])),
        coverage=float(np.mean((lo <= ace) & (ace <= hi))),
        rejection_rate=float(np.mean((lo > 0.0) | (hi < 0.0))),
        reps_used=used,
        reps_failed=failed,
    )


def run_cell(
    scenario: ScenarioConfig,
    n: int,
    spec,
    reps: int,
    master_seed: int,
    workers: int = 1,
) -> McSummary:
    """Simulate and summarise one (scenario, n, estimator) cell."""
    if n < MIN_N:
        raise InputError(f"n must be at least {MIN_N}")
    if reps < 1:
        raise InputError("reps must be at least 1")
    ace = scoring_ace(scenario)
    draws = simulate_cell(scenario, n, spec, reps, master_seed, workers)
    return summarize(scenario, n, spec, draws, ace)


def run_grid(config: McConfig, keep_reps: bool = False):
    """Summaries for every cell, ordered by scenario, then n, then estimator.

    With ``keep_reps`` the per-replication draws are returned as well, as a
    list aligned with the summaries.
    """
    cells = config.cells()
    aces = [scoring_ace(s) for s, _, _ in cells]
    tasks, owner = [], []
    for c, (scen, n, kind) in enumerate(cells):
        for a, b in _chunks(config.reps, config.chunk):
            tasks.append((scen, n, kind, config.master_seed, a, b))
            owner.append(c)
    results = _run_tasks(tasks, config.workers)
    per_cell: list[list] = [[] for _ in cells]
    for c, res in zip(owner, results):
        per_cell[c].append(res)
    draws = [_join(parts) for parts in per_cell]
    summaries = [
        summarize(scen, n, kind, d, ace) for (scen, n, kind), d, ace in zip(cells, draws, aces)
    ]
    if keep_reps:
        return summaries, draws
    return summaries
