import numpy as np
import pytest

from noshlab.dgp import builtin_scenario
from noshlab.errors import InputError
from noshlab.ivest import Z_975, IvKind
from noshlab.mc import (
    CellDraws,
    McConfig,
    derive_rep_seed,
    run_cell,
    run_grid,
    simulate_cell,
    splitmix64,
    summarize,
)


def test_splitmix64_reference_values():
    # The k-th output of the SplitMix64 generator seeded with 0 is the step
    # applied to state k * increment.
    gamma = 0x9E3779B97F4A7C15
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(gamma) == 0x6E789E6AA1B965F4
    assert splitmix64((2 * gamma) % 2**64) == 0x06C45D188009454F


def test_seed_derivation_is_deterministic_and_distinct():
    a = derive_rep_seed(7, 1, 250, IvKind.TSLS1, 0)
    assert a == derive_rep_seed(7, 1, 250, IvKind.TSLS1, 0)
    assert a != derive_rep_seed(7, 1, 250, IvKind.TSLS1, 1)
    assert a != derive_rep_seed(8, 1, 250, IvKind.TSLS1, 0)
    assert 0 <= a < 2**64


def test_no_seed_collisions_across_a_grid():
    seeds = {
        derive_rep_seed(0, s, n, k, r)
        for s in range(1, 6)
        for n in (250, 1000, 2500, 5000, 10000)
        for k in IvKind
        for r in range(800)
    }
    assert len(seeds) == 5 * 5 * 5 * 800


@pytest.mark.parametrize(
    "kwargs",
    [
        {"reps": 0},
        {"sample_sizes": [29]},
        {"sample_sizes": []},
        {"specs": ["9"]},
        {"workers": 0},
    ],
)
def test_invalid_configs(kwargs):
    base = dict(scenarios=[builtin_scenario(1)], sample_sizes=[100], specs=["1"], reps=5)
    with pytest.raises(InputError):
        McConfig(**{**base, **kwargs})


def test_workers_do_not_enter_config_equality():
    base = dict(scenarios=[builtin_scenario(1)], sample_sizes=[100], specs=["1"], reps=5)
    assert McConfig(**base, chunk=3) == McConfig(**base, chunk=7)


def test_grid_order_and_cardinality():
    cfg = McConfig([builtin_scenario(1), builtin_scenario(2)], [60, 80], ["1", "4"], reps=3)
    out = run_grid(cfg)
    assert [(s.scenario, s.n, s.spec.value) for s in out] == [
        (sc, n, k) for sc in ("1", "2") for n in (60, 80) for k in ("1", "4")
    ]
    for s in out:
        assert s.reps_used + s.reps_failed == 3
        assert 0 <= s.coverage <= 1 and 0 <= s.rejection_rate <= 1


def test_chunking_does_not_change_results():
    scen = builtin_scenario(3)
    a = simulate_cell(scen, 120, "2", 23, 5, chunk=4)
    b = simulate_cell(scen, 120, "2", 23, 5, chunk=100)
    np.testing.assert_array_equal(a.seeds, b.seeds)
    np.testing.assert_array_equal(a.points, b.points)


def test_process_pool_matches_inline_run():
    cfg = dict(scenarios=[builtin_scenario(1)], sample_sizes=[100], specs=["1", "3"], reps=12, chunk=5)
    assert run_grid(McConfig(**cfg, workers=1)) == run_grid(McConfig(**cfg, workers=3))


def test_summary_metrics_by_hand():
    points = np.array([0.1, 0.2, 0.4, np.nan, 1.0])
    ses = np.array([0.1, 0.05, 0.1, 0.1, 0.1])
    d = CellDraws(np.arange(5, dtype=np.uint64), points, ses)
    s = summarize(builtin_scenario(1), 100, "1", d, ace=0.25)
    assert (s.reps_used, s.reps_failed) == (4, 1)
    assert s.median_bias == pytest.approx(0.3 - 0.25)
    assert s.median_se == pytest.approx(0.1)
    covers = [abs(p - 0.25) <= Z_975 * e for p, e in zip(points[[0, 1, 2, 4]], ses[[0, 1, 2, 4]])]
    excludes = [abs(p) > Z_975 * e for p, e in zip(points[[0, 1, 2, 4]], ses[[0, 1, 2, 4]])]
    assert s.coverage == pytest.approx(np.mean(covers))
    assert s.rejection_rate == pytest.approx(np.mean(excludes))
    assert s.unreliable


def test_all_failed_cell_reports_nan():
    d = CellDraws(np.zeros(2, dtype=np.uint64), np.full(2, np.nan), np.full(2, np.nan))
    s = summarize(builtin_scenario(1), 100, "1", d)
    assert s.reps_used == 0 and np.isnan(s.coverage)


def test_cell_scores_against_reference_ace():
    s = run_cell(builtin_scenario(3), 200, "1", 4, 0)
    assert s.ace == 0.75


@pytest.mark.slow
def test_scenario1_cell_is_unbiased_with_nominal_coverage():
    s = run_cell(builtin_scenario(1), 2500, "1", 2000, 0)
    assert abs(s.median_bias) <= 0.01
    assert abs(s.coverage - 0.951) <= 0.015


@pytest.mark.slow
def test_scenario2_cell_is_biased():
    s = run_cell(builtin_scenario(2), 10000, "1", 2000, 0)
    assert abs(s.median_bias - 1.320) <= 0.05
    assert s.coverage <= 0.01


@pytest.mark.slow
def test_scenario3_cell_bias_and_rejection():
    s = run_cell(builtin_scenario(3), 2500, "1", 2000, 0)
    assert abs(s.median_bias - 0.413) <= 0.03
    assert s.rejection_rate >= 0.99
