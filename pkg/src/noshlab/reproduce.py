"""Side-by-side comparison of a simulated grid with the reference table.

The reference values (median bias, coverage % and power %, from 20000
replications per cell) ship as ``data/table1.csv``. Each simulated metric
is compared against its reference under a tolerance that grows with the
Monte Carlo noise of both runs.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .dgp import BUILTIN_IDS, builtin_scenario
from .ivest import IvKind
from .mc import CellDraws, McConfig, McSummary, run_grid

#: Replications behind each reference value.
REFERENCE_REPS = 20000
GRID_N = (250, 1000, 2500, 5000, 10000)
GRID_SPECS = (IvKind.TSLS1, IvKind.TSLS2, IvKind.TSLS3, IvKind.TSLS4)
BIAS_FLOOR = 0.05
#: Floor for coverage and power tolerances, in percentage points.
RATE_FLOOR = 1.6
#: Tolerances are this many standard errors of the difference.
N_SE = 4.0
#: Asymptotic efficiency factor of the sample median under normality.
MEDIAN_SE_FACTOR = math.sqrt(math.pi / 2)


@dataclass(frozen=True)
class ReferenceRow:
    scenario: int
    n: int
    spec: IvKind
    bias: float
    coverage: float
    power: float


@dataclass(frozen=True)
class Comparison:
    scenario: int
    n: int
    spec: IvKind
    metric: str
    simulated: float
    reference: float
    tolerance: float

    @property
    def abs_diff(self) -> float:
        return abs(self.simulated - self.reference)

    @property
    def passed(self) -> bool:
        return self.abs_diff <= self.tolerance


def load_reference() -> dict[tuple[int, int, IvKind], ReferenceRow]:
    """Reference rows keyed by ``(scenario, n, spec)``."""
    text = resources.files("noshlab").joinpath("data/table1.csv").read_text(encoding="utf-8")
    lines = [ln for ln in io.StringIO(text) if not ln.startswith("#")]
    out = {}
    for rec in csv.DictReader(lines):
        row = ReferenceRow(
            scenario=int(rec["scenario"]),
            n=int(rec["n"]),
            spec=IvKind.parse(rec["spec"]),
            bias=float(rec["bias"]),
            coverage=float(rec["coverage"]),
            power=float(rec["power"]),
        )
        out[(row.scenario, row.n, row.spec)] = row
    return out


def bias_tolerance(points: np.ndarray) -> float:
    """``max(0.05, 4 SE)`` where SE is that of the difference of two medians.

    The spread is estimated robustly from the interquartile range.
    """
    points = points[np.isfinite(points)]
    if points.size < 2:
        return math.inf
    q1, q3 = np.percentile(points, [25, 75])
    sd = (q3 - q1) / 1.349
    se = MEDIAN_SE_FACTOR * sd * math.sqrt(1.0 / points.size + 1.0 / REFERENCE_REPS)
    return float(max(BIAS_FLOOR, N_SE * se))


def rate_tolerance(reference_pct: float, reps: int) -> float:
    """``max(1.6, 4 SE)`` percentage points for a binomial proportion."""
    p = min(max(reference_pct / 100.0, 0.0), 1.0)
    se = math.sqrt(p * (1.0 - p) * (1.0 / reps + 1.0 / REFERENCE_REPS))
    return max(RATE_FLOOR, 100.0 * N_SE * se)


def compare(summaries: list[McSummary], draws: list[CellDraws]) -> list[Comparison]:
    """Three comparisons per summarised cell, in grid order."""
    ref = load_reference()
    out = []
    for s, d in zip(summaries, draws):
        key = (int(s.scenario), s.n, s.spec)
        if key not in ref:
            continue
        r = ref[key]
        reps = max(s.reps_used, 1)
        out += [
            Comparison(*key, "bias", s.median_bias, r.bias, bias_tolerance(d.points)),
            Comparison(*key, "coverage", 100.0 * s.coverage, r.coverage, rate_tolerance(r.coverage, reps)),
            Comparison(*key, "power", 100.0 * s.rejection_rate, r.power, rate_tolerance(r.power, reps)),
        ]
    return out


def reproduce(reps: int, master_seed: int = 0, workers: int = 1) -> tuple[list[McSummary], list[Comparison]]:
    """Run the full reference grid and compare every metric."""
    config = McConfig(
        scenarios=[builtin_scenario(i) for i in BUILTIN_IDS],
        sample_sizes=GRID_N,
        specs=GRID_SPECS,
        reps=reps,
        master_seed=master_seed,
        workers=workers,
    )
    summaries, draws = run_grid(config, keep_reps=True)
    return summaries, compare(summaries, draws)
