import json
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noshlab.dgp import (
    BLOCKS,
    ErrorDist,
    ScenarioConfig,
    Triple,
    analytic_ace,
    beta_x_oracle,
    beta_y_oracle,
    builtin_scenario,
    classify,
    draw_errors,
    expected_treatment,
    generate,
    multiplicative_additive_mod,
    outcome_equation,
    raw_errors,
    resolve_scenario,
    scoring_ace,
    treatment_equation,
)
from noshlab.errors import InputError, UnsupportedConfigError

seeds = st.integers(0, 2**32 - 1)


def _oracle_ace(cfg):
    """ACE by direct enumeration of the 16 equally likely (U5, V5, U6, V6) cells."""
    total = 0.0
    for u5 in (0, 1):
        for v5 in (0, 1):
            for u6 in (0, 1):
                for v6 in (0, 1):
                    b = cfg.tau + 2 * cfg.phi * expected_treatment(cfg)
                    for k, (u, v) in ((5, (u5, v5)), (6, (u6, v6))):
                        t = cfg.theta_y.get(k, Triple())
                        b += t.u * u + t.v * v + t.uv * u * v
                    total += b / 16
    return total


# -- built-in scenarios ----------------------------------------------------------


def test_scenario1_parameters():
    c = builtin_scenario(1)
    assert (c.gamma, c.rho, c.tau, c.phi) == (-0.4, 0.3, 0.5, 0.0)
    assert c.theta_x[4] == Triple(0.5, -1.0, 0.0)
    assert c.theta_y[5] == Triple(0.5, -1.0, 0.0)
    assert c.theta_x.get(6, Triple()).is_zero() and c.theta_y.get(6, Triple()).is_zero()
    assert all(c.delta_x[k] == Triple(0.5, 0.5, 0.5) == c.delta_y[k] for k in BLOCKS)
    assert c.error_dist is ErrorDist.STANDARD_NORMAL


def test_scenario2_parameters():
    c = builtin_scenario(2)
    assert c.theta_x[6] == c.theta_y[6] == Triple(0.5, 0.5, 0.5)
    assert c.theta_x.get(4, Triple()).is_zero() and c.theta_y.get(5, Triple()).is_zero()


def test_scenario3_differs_from_1_only_in_outcome_curvature():
    a, b = builtin_scenario(1), builtin_scenario(3)
    assert (b.tau, b.phi) == (0.0, 0.2)
    assert a.theta_x == b.theta_x and a.theta_y == b.theta_y and a.delta_x == b.delta_x


@pytest.mark.parametrize("sid, dist", [(4, ErrorDist.BETA_HALF_HALF), (5, ErrorDist.CHISQ_MIXTURE)])
def test_non_normal_scenarios_are_scenario1_otherwise(sid, dist):
    a, b = builtin_scenario(1), builtin_scenario(sid)
    assert b.error_dist is dist
    assert a.to_dict() | {"error_dist": dist.value} == {
        **b.to_dict(), "reference_ace": a.reference_ace, "name": a.name, "description": a.description
    }


@pytest.mark.parametrize("bad", [0, 6, "x", None])
def test_unknown_builtin_is_input_error(bad):
    with pytest.raises(InputError):
        builtin_scenario(bad)


@pytest.mark.parametrize("sid, ace", [(1, 0.250), (2, 1.125), (3, 0.750), (4, 0.250), (5, 0.250)])
def test_reference_aces(sid, ace):
    assert scoring_ace(builtin_scenario(sid)) == ace


@pytest.mark.parametrize("sid", [1, 2, 4, 5])
def test_analytic_ace_equals_reference_without_curvature(sid):
    c = builtin_scenario(sid)
    assert analytic_ace(c) == pytest.approx(c.reference_ace, abs=1e-15)


@pytest.mark.parametrize("sid", [1, 2, 3])
def test_analytic_ace_matches_enumeration(sid):
    c = builtin_scenario(sid)
    assert analytic_ace(c) == pytest.approx(_oracle_ace(c), abs=1e-14)


def test_scenario3_ace_depends_on_instrument_power():
    # E[X] = 4 (0.5 + 0.5 + 0.125) = 2.5 from the confounders, plus rho E[Z^p].
    c = builtin_scenario(3)
    assert expected_treatment(c) == pytest.approx(2.8)
    assert analytic_ace(c) == pytest.approx(0.87)
    cubic = ScenarioConfig.from_dict({**c.to_dict(), "rho_power": 3})
    assert expected_treatment(cubic) == pytest.approx(2.5)
    assert analytic_ace(cubic) == pytest.approx(0.750)


def test_curvature_with_non_normal_errors_is_unsupported():
    c = ScenarioConfig.from_dict({**builtin_scenario(3).to_dict(), "error_dist": "beta_half_half"})
    with pytest.raises(UnsupportedConfigError):
        analytic_ace(c)
    assert generate(c.with_n(50), 0).ace is None


# -- configuration I/O -------------------------------------------------------------


@pytest.mark.parametrize("sid", [1, 2, 3, 4, 5])
def test_json_round_trip(sid):
    c = builtin_scenario(sid)
    assert ScenarioConfig.from_json(c.to_json()) == c


def test_resolve_accepts_ids_and_paths(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(builtin_scenario(2).to_json())
    assert resolve_scenario("2") == builtin_scenario(2)
    assert resolve_scenario(str(p)) == builtin_scenario(2)


@pytest.mark.parametrize(
    "patch",
    [
        {"rho_power": 4},
        {"n": 1},
        {"gamma": float("nan")},
        {"theta_x": {"5": [1, 0, 0]}},
        {"delta_x": {"3": [1, 2]}},
        {"error_dist": "cauchy"},
        {"unknown_key": 1},
    ],
)
def test_invalid_configs_are_input_errors(patch):
    with pytest.raises(InputError):
        ScenarioConfig.from_dict({**builtin_scenario(1).to_dict(), **patch})


def test_unparseable_json_is_input_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InputError):
        resolve_scenario(str(p))


def test_seed_key_ignores_n_for_custom_scenarios():
    c = ScenarioConfig(name="", gamma=1.0)
    assert c.seed_key() == c.with_n(500).seed_key()
    assert c.seed_key() != ScenarioConfig(gamma=2.0).seed_key()
    assert builtin_scenario(4).seed_key() == 4


# -- errors --------------------------------------------------------------------------


@pytest.mark.parametrize("dist", [ErrorDist.BETA_HALF_HALF, ErrorDist.CHISQ_MIXTURE])
@given(seed=seeds, n=st.integers(2, 500))
def test_non_normal_errors_are_standardised(dist, seed, n):
    e = draw_errors(dist, n, seed)
    assert abs(e.mean()) < 1e-10
    assert e.var(ddof=1) == pytest.approx(1.0, abs=1e-10)


def test_normal_errors_are_raw():
    a = draw_errors(ErrorDist.STANDARD_NORMAL, 1000, 9)
    np.testing.assert_array_equal(a, np.random.default_rng(9).standard_normal(1000))


def test_standardised_errors_need_two_draws():
    with pytest.raises(InputError):
        draw_errors(ErrorDist.BETA_HALF_HALF, 1, 0)


def test_chisq_mixture_raw_moments():
    # E = 2 + 7 * 0.5 = 5.5; Var = 4 + 49 * 0.25 = 16.25.
    n = 1_000_000
    raw = raw_errors(ErrorDist.CHISQ_MIXTURE, n, np.random.default_rng(11))
    assert abs(raw.mean() - 5.5) < 5 * np.sqrt(16.25 / n)
    # SE of the sample variance is sqrt((mu4 - sigma^4) / n); mu4 = 144 (chi2(2))
    # + 6 * 4 * 12.25 (cross term) + 7^4 / 16 (Bernoulli part) = 588.0625.
    mu4 = 144 + 6 * 4 * 12.25 + 7**4 / 16
    assert abs(raw.var() - 16.25) < 5 * np.sqrt((mu4 - 16.25**2) / n)


def test_beta_raw_moments():
    n = 200_000
    raw = raw_errors(ErrorDist.BETA_HALF_HALF, n, np.random.default_rng(12))
    assert abs(raw.mean() - 0.5) < 5 * np.sqrt(0.125 / n)
    assert raw.var() == pytest.approx(0.125, rel=0.02)


# -- generation ------------------------------------------------------------------------


def test_generation_is_deterministic():
    c = builtin_scenario(2).with_n(500)
    a, b = generate(c, 42), generate(c, 42)
    for name in a.data.names:
        np.testing.assert_array_equal(a.data[name], b.data[name])
    assert not np.array_equal(a.data["Y"], generate(c, 43).data["Y"])


def test_generated_columns():
    g = generate(builtin_scenario(1).with_n(100), 0)
    assert g.data.names == ["Z", "X", "Y", "U3", "V3", "U4", "V4", "U5", "V5", "U6", "V6"]
    for k in BLOCKS:
        assert set(np.unique(g.data[f"U{k}"])) <= {0.0, 1.0}


@pytest.mark.parametrize("sid", [1, 2, 3, 4, 5])
def test_generated_data_satisfy_structural_equations(sid):
    c = builtin_scenario(sid).with_n(3000)
    g = generate(c, sid)
    conf = {k: g.data[k] for k in g.data.names if k[0] in "UV"}
    x = treatment_equation(c, g.data["Z"], conf, g.errors["X"])
    y = outcome_equation(c, g.data["X"], conf, g.errors["Y"])
    np.testing.assert_allclose(g.data["X"], x, rtol=1e-13, atol=1e-12)
    np.testing.assert_allclose(g.data["Y"], y, rtol=1e-13, atol=1e-12)


def test_homogeneous_effect_has_constant_oracle():
    c = ScenarioConfig(n=200, tau=1.7, delta_x={3: (1, 1, 1)}, delta_y={3: (1, 1, 1)})
    np.testing.assert_array_equal(generate(c, 0).beta_y, 1.7)


def test_mean_treatment_matches_expectation():
    n = 100_000
    for power, target in ((2, 2.8), (3, 2.5)):
        c = ScenarioConfig.from_dict({**builtin_scenario(1).to_dict(), "rho_power": power, "n": n})
        assert expected_treatment(c) == pytest.approx(target)
        x = generate(c, 5).data["X"]
        assert abs(x.mean() - target) < 5 * x.std(ddof=1) / np.sqrt(n)


def test_scenario3_oracle_mean_matches_analytic_ace():
    n = 100_000
    for power, target in ((2, 0.87), (3, 0.750)):
        c = ScenarioConfig.from_dict({**builtin_scenario(3).to_dict(), "rho_power": power, "n": n})
        b = generate(c, 6).beta_y
        assert abs(b.mean() - target) < 5 * b.std(ddof=1) / np.sqrt(n)


@pytest.mark.parametrize("sid", [1, 2, 3])
@given(seed=seeds)
def test_oracles_match_central_differences(sid, seed):
    c = builtin_scenario(sid).with_n(50)
    g = generate(c, seed)
    conf = {k: g.data[k] for k in g.data.names if k[0] in "UV"}
    z, x, h = g.data["Z"], g.data["X"], 1e-4
    dz = (treatment_equation(c, z + h, conf, g.errors["X"]) - treatment_equation(c, z - h, conf, g.errors["X"])) / (2 * h)
    dx = (outcome_equation(c, x + h, conf, g.errors["Y"]) - outcome_equation(c, x - h, conf, g.errors["Y"])) / (2 * h)
    np.testing.assert_allclose(dz, beta_x_oracle(c, z, conf), atol=1e-6)
    np.testing.assert_allclose(dx, beta_y_oracle(c, x, conf), atol=1e-6)


# -- assumptions ----------------------------------------------------------------------------


def test_classification_of_builtins():
    s1, s2, s3 = (classify(builtin_scenario(i)) for i in (1, 2, 3))
    assert (s1.nosh, s1.nem1, s1.nem2) == (True, False, False)
    assert (s2.assumption1, s2.assumption2, s2.nosh) == (False, True, False)
    assert (s3.assumption1, s3.assumption2, s3.nosh) == (True, False, False)


@pytest.mark.parametrize("sid", [4, 5])
def test_error_regime_does_not_change_classification(sid):
    assert classify(builtin_scenario(sid)) == classify(builtin_scenario(1))


def test_homogeneous_model_satisfies_every_assumption():
    r = classify(ScenarioConfig(tau=1.0))
    assert all(r.as_dict().values())


def test_multiplicative_model_corners():
    # E[X | Z, V] = 0.1 * 2^Z * 1.5^V at the four corners.
    corner = {(z, v): 0.1 * 2**z * 1.5**v for z in (0, 1) for v in (0, 1)}
    oracle = (corner[1, 0] - corner[0, 0], corner[1, 1] - corner[0, 1])
    assert multiplicative_additive_mod(0.1, 2.0, 1.5) == pytest.approx(oracle)
    assert oracle == pytest.approx((0.1, 0.15))


def test_multiplicative_model_special_cases():
    a, b = multiplicative_additive_mod(0.2, 3.0, 1.0)
    assert a == b
    assert multiplicative_additive_mod(0.2, 1.0, 1.7) == (0.0, 0.0)


def test_multiplicative_model_warns_above_one():
    with pytest.warns(RuntimeWarning):
        multiplicative_additive_mod(0.5, 2.0, 1.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        multiplicative_additive_mod(0.1, 2.0, 1.5)
