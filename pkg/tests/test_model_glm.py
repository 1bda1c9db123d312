import numpy as np
import pytest

from collab_score.errors import DimensionMismatch, EmptySite, InvalidCovariance, SchemaMismatch
from collab_score.model import (
    CovarianceSpec,
    GlmFamily,
    PartitionedParam,
    SiteData,
    gradient,
    hessian,
    loss,
    per_sample_scores,
    score_covariance,
    simulate,
)


def _site(family: str, seed: int = 0, n: int = 60, p: int = 4) -> tuple[GlmFamily, SiteData, np.ndarray]:
    fam = GlmFamily.of(family)
    beta = np.array([0.5, -0.3, 0.0, 0.8])[:p]
    data = simulate(fam, beta, n, CovarianceSpec.toeplitz(p, 0.5), seed)
    return fam, data, beta


@pytest.mark.parametrize("family", ["gaussian", "logistic"])
def test_gradient_matches_finite_differences(family: str) -> None:
    fam, data, _ = _site(family)
    point = np.array([0.2, 0.1, -0.4, 0.3])
    step = 1e-6
    numeric = np.array(
        [
            (loss(fam, point + step * e, data) - loss(fam, point - step * e, data)) / (2 * step)
            for e in np.eye(4)
        ]
    )
    analytic = gradient(fam, point, data)
    assert np.allclose(analytic, numeric, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("family", ["gaussian", "logistic"])
def test_hessian_matches_finite_differences(family: str) -> None:
    fam, data, _ = _site(family)
    point = np.array([0.2, 0.1, -0.4, 0.3])
    step = 1e-5
    numeric = np.column_stack(
        [
            (gradient(fam, point + step * e, data) - gradient(fam, point - step * e, data)) / (2 * step)
            for e in np.eye(4)
        ]
    )
    analytic = hessian(fam, point, data, range(4))
    assert np.allclose(analytic, numeric, rtol=1e-5, atol=1e-8)
    assert np.allclose(hessian(fam, point, data, [3, 1]), analytic[np.ix_([3, 1], [3, 1])])


def test_gaussian_loss_closed_form() -> None:
    fam = GlmFamily.of("gaussian")
    data = SiteData(X=np.array([[1.0, 0.0], [0.0, 2.0]]), y=np.array([1.0, 1.0]))
    beta = np.array([1.0, 1.0])
    # mean(0.5 * eta^2 - y * eta) with eta = (1, 2)
    assert loss(fam, beta, data) == pytest.approx(0.5 * ((0.5 - 1.0) + (2.0 - 2.0)))
    assert np.allclose(gradient(fam, beta, data), [0.0, 1.0])


def test_score_covariance_is_mean_outer_product() -> None:
    fam, data, beta = _site("logistic")
    scores = per_sample_scores(fam, beta, data, [0, 2])
    expected = scores.T @ scores / data.n
    assert np.allclose(score_covariance(fam, beta, data, [0, 2]), expected)
    assert scores.shape == (data.n, 2)


def test_logistic_loss_is_stable_for_extreme_predictors() -> None:
    fam = GlmFamily.of("logistic")
    data = SiteData(X=np.array([[1.0], [1.0]]), y=np.array([1.0, 0.0]))
    value = loss(fam, np.array([800.0]), data)
    assert np.isfinite(value)
    assert value == pytest.approx(400.0)
    assert np.all(np.isfinite(gradient(fam, np.array([-800.0]), data)))


def test_simulate_is_deterministic_per_seed() -> None:
    fam = GlmFamily.of("logistic")
    sigma = CovarianceSpec.toeplitz(6, 0.5)
    beta = np.array([1.0, 0.0, 0.0, 1.0, 1.0, 0.0])
    first = simulate(fam, beta, 40, sigma, np.random.SeedSequence(7, spawn_key=(0, 1)))
    second = simulate(fam, beta, 40, sigma, np.random.SeedSequence(7, spawn_key=(0, 1)))
    other = simulate(fam, beta, 40, sigma, np.random.SeedSequence(7, spawn_key=(0, 2)))

    assert np.array_equal(first.X, second.X)
    assert np.array_equal(first.y, second.y)
    assert not np.array_equal(first.X, other.X)
    assert set(np.unique(first.y)) <= {0.0, 1.0}


def test_toeplitz_covariance_entries() -> None:
    sigma = CovarianceSpec.toeplitz(4, 0.5).dense()
    assert sigma[0, 3] == pytest.approx(0.125)
    assert sigma[2, 1] == pytest.approx(0.5)
    with pytest.raises(InvalidCovariance):
        _ = CovarianceSpec.explicit(np.array([[1.0, 2.0], [2.0, 1.0]])).cholesky


def test_site_data_validation() -> None:
    with pytest.raises(EmptySite):
        SiteData(X=np.zeros((0, 3)), y=np.zeros(0))
    with pytest.raises(DimensionMismatch):
        SiteData(X=np.zeros((3, 2)), y=np.zeros(2))
    with pytest.raises(SchemaMismatch):
        SiteData(X=np.array([[np.nan]]), y=np.array([1.0]))
    data = SiteData(X=np.ones((2, 1)), y=np.array([0.0, 2.0]))
    with pytest.raises(SchemaMismatch):
        data.validate(GlmFamily.of("logistic"))
    with pytest.raises(ValueError):
        data.X[0, 0] = 5.0


def test_partitioned_param_support_is_exact_nonzeros() -> None:
    param = PartitionedParam.from_target(np.array([0.0, 0.0, 1e-300, -2.0, 0.0]), [1])
    assert param.theta().tolist() == [0.0]
    assert param.support() == (2, 3)
    assert param.d == 1 and param.p == 5
    with pytest.raises(DimensionMismatch):
        PartitionedParam(beta=np.zeros(3), target_idx=(0,), nuisance_idx=(0, 1, 2))


@pytest.mark.parametrize("family", ["gaussian", "logistic"])
def test_gradient_is_monotone(family: str) -> None:
    fam, data, _ = _site(family, seed=9, n=120)
    rng = np.random.default_rng(17)
    for _ in range(25):
        first, second = rng.normal(0.0, 2.0, size=(2, 4))
        gap = gradient(fam, first, data) - gradient(fam, second, data)
        assert gap @ (first - second) >= -1e-12
        assert loss(fam, 0.5 * (first + second), data) <= 0.5 * (loss(fam, first, data) + loss(fam, second, data)) + 1e-12
