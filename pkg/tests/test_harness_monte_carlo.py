from functools import lru_cache

import numpy as np
import pytest
from scipy import stats

from collab_score.errors import Diverged, MonteCarloAborted
from collab_score.harness import (
    HarnessSettings,
    McResult,
    SimConfig,
    make_scene,
    population_variance,
    power_curve,
    run_monte_carlo,
    run_replication,
)
from collab_score.harness import monte_carlo
from collab_score.model import CovarianceSpec


def _cfg(**overrides: object) -> SimConfig:
    base = {
        "family": "gaussian",
        "m": 3,
        "n_per_site": 60,
        "p": 10,
        "replications": 4,
        "n_lambda": 8,
        "max_outer": 4,
        "inner_tol": 1e-8,
        "alphas": [0.05, 0.1],
        "seed": 3,
    }
    return SimConfig.model_validate({**base, **overrides})


def test_small_run_aggregates_reports() -> None:
    seen: list[int] = []
    result = run_monte_carlo(_cfg(), HarnessSettings(workers=2), on_report=lambda rep, cst, ocst: seen.append(rep))

    assert result.replications == 4
    assert seen == [0, 1, 2, 3]
    assert result.failures == 0
    for alpha, rate in result.rejection_rate.items():
        assert rate == np.count_nonzero(result.p_values < alpha) / 4
    assert result.oracle_p_values is not None and result.oracle_p_values.shape == (4,)
    assert 0.0 <= result.agreement <= 1.0
    assert result.mean_rounds >= 4.0
    assert set(result.summary()["rejection_rate"]) == {"0.05", "0.1"}


def test_results_do_not_depend_on_worker_count() -> None:
    cfg = _cfg(family="logistic", run_oracle=False, n_per_site=80)
    serial = run_monte_carlo(cfg, HarnessSettings(workers=1))
    parallel = run_monte_carlo(cfg, HarnessSettings(workers=3))
    assert np.array_equal(serial.p_values, parallel.p_values)
    assert serial.rejection_rate == parallel.rejection_rate
    assert serial.oracle_rejection_rate is None


def test_replication_errors_are_recorded_then_abort(monkeypatch: pytest.MonkeyPatch) -> None:
    def explode(*_args: object, **_kwargs: object) -> None:
        raise Diverged("step floor")

    monkeypatch.setattr(monte_carlo, "run_two_stage", explode)
    outcome = run_replication(_cfg(), 0)
    assert not outcome.ok
    assert outcome.error is not None and "Diverged" in outcome.error
    with pytest.raises(MonteCarloAborted):
        run_monte_carlo(_cfg(), HarnessSettings(workers=1))


def test_population_variance_for_gaussian_univariate() -> None:
    cfg = _cfg(p=8)
    sigma = CovarianceSpec.toeplitz(8, 0.5).dense()
    b = [0, 3, 4]
    expected = np.linalg.inv(sigma[np.ix_(b, b)])[0, 0]
    assert population_variance(cfg)[0, 0] == pytest.approx(expected)


def test_power_curve_reports_theoretical_next_to_empirical() -> None:
    points, results = power_curve(_cfg(run_oracle=False, replications=3), [0.0, 0.4], HarnessSettings(workers=2), 0.05)
    assert [point.h for point in points] == [0.0, 0.4]
    assert points[0].theoretical == pytest.approx(0.05, abs=1e-8)
    assert points[1].theoretical > points[0].theoretical
    assert len(results) == 2
    assert all(0.0 <= point.empirical <= 1.0 for point in points)



def test_numpy_linalg_failures_are_recorded(monkeypatch: pytest.MonkeyPatch) -> None:
    def singular(*_args: object, **_kwargs: object) -> None:
        raise np.linalg.LinAlgError("Singular matrix")

    monkeypatch.setattr(monte_carlo, "run_two_stage", singular)
    outcome = run_replication(_cfg(), 1)
    assert not outcome.ok
    assert outcome.error == "LinAlgError: Singular matrix"
    assert not outcome.recovered


def test_supports_are_reported_in_natural_coordinates() -> None:
    contrast = make_scene(_cfg(hypothesis="H3_contrast"), 0)
    with contrast.cluster:
        assert contrast.permutation[:2] == (3, 4)
        assert contrast.natural_support([0, 1, 5]) == (3, 4, 5)
        assert contrast.natural_support(contrast.true_support) == ()

    cfg = _cfg(n_per_site=120, replications=2)
    outcome = run_replication(cfg, 0)
    assert outcome.truth == (3, 4)
    assert {3, 4} <= set(outcome.selected)
    result = run_monte_carlo(cfg, HarnessSettings(workers=1))
    assert result.support_recovery is not None and 0.0 <= result.support_recovery <= 1.0
    assert result.summary()["support_recovery"] == result.support_recovery


def _ks_critical(reps: int) -> float:
    return 1.63 / np.sqrt(reps)


@lru_cache(maxsize=None)
def _desk_null(family: str) -> McResult:
    cfg = SimConfig(family=family, hypothesis="H1_univariate", h=0.0, seed=11).with_profile("desk")
    return run_monte_carlo(cfg, HarnessSettings.from_env())


@pytest.mark.slow
def test_desk_scale_size_is_within_binomial_band() -> None:
    assert 0.010 <= _desk_null("gaussian").rejection_rate[0.05] <= 0.100


@pytest.mark.slow
def test_desk_scale_power_grows_with_h() -> None:
    cfg = SimConfig(family="gaussian", hypothesis="H1_univariate", seed=12, run_oracle=False).with_profile("desk")
    points, _ = power_curve(cfg, settings=HarnessSettings.from_env())
    rates = [point.empirical for point in points]
    assert all(later >= earlier - 0.05 for earlier, later in zip(rates, rates[1:]))
    assert rates[-1] > 0.9


@pytest.mark.slow
def test_desk_scale_logistic_size_and_power() -> None:
    assert 0.010 <= _desk_null("logistic").rejection_rate[0.05] <= 0.100
    cfg = SimConfig(family="logistic", hypothesis="H1_univariate", seed=13, run_oracle=False).with_profile("desk")
    top = cfg.resolved_h_grid()[-1]
    points, _ = power_curve(cfg, [top], HarnessSettings.from_env())
    assert points[0].empirical >= 0.8


@pytest.mark.slow
def test_desk_scale_cst_agrees_with_oracle_under_the_null() -> None:
    result = _desk_null("gaussian")
    assert result.agreement is not None
    assert result.agreement >= 0.9


@pytest.mark.slow
@pytest.mark.parametrize("family", ["gaussian", "logistic"])
def test_desk_scale_null_p_values_are_uniform(family: str) -> None:
    p_values = _desk_null(family).p_values
    assert stats.kstest(p_values, "uniform").statistic < _ks_critical(p_values.shape[0])


@pytest.mark.slow
def test_empirical_power_tracks_the_asymptotic_power_function() -> None:
    cfg = SimConfig(
        family="gaussian",
        hypothesis="H1_univariate",
        m=20,
        n_per_site=200,
        p=100,
        replications=200,
        seed=14,
        run_oracle=False,
    )
    points, _ = power_curve(cfg, [0.015, 0.03, 0.04, 0.05], HarnessSettings.from_env())
    for point in points:
        assert abs(point.empirical - point.theoretical) <= 0.10
