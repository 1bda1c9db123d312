import numpy as np
import pytest

from collab_score.cluster import Cluster
from collab_score.errors import Diverged
from collab_score.model import CovarianceSpec, GlmFamily, SiteData, gradient, loss, simulate
from collab_score.solver import (
    StageConfig,
    SurrogateLoss,
    hbic_path,
    hbic_score,
    lambda_grid,
    lambda_max,
    select_by_hbic,
    surrogate_gradient,
)

_BETA = np.array([0.5, 0.0, 1.0, 0.0, -0.5])


def _cluster(family: str, sizes: tuple[int, ...] = (60, 40, 40)) -> Cluster:
    fam = GlmFamily.of(family)
    sigma = CovarianceSpec.toeplitz(5, 0.5)
    sites = [simulate(fam, _BETA, n, sigma, np.random.SeedSequence(11, spawn_key=(k,))) for k, n in enumerate(sizes)]
    return Cluster.from_sites(sites, fam)


@pytest.mark.parametrize("family", ["gaussian", "logistic"])
def test_surrogate_gradient_at_anchor_is_the_global_gradient(family: str) -> None:
    with _cluster(family) as cluster:
        anchor = np.array([0.1, 0.0, 0.3, -0.2, 0.0])
        g_anchor, _ = cluster.global_gradient(anchor)
        surrogate = SurrogateLoss.collaborative(cluster, anchor, g_anchor)
        assert np.array_equal(surrogate.gradient(anchor), g_anchor)
        assert np.array_equal(surrogate_gradient(cluster, anchor, anchor, g_anchor), g_anchor)
        _, evaluated = surrogate.evaluate(anchor)
        assert np.allclose(evaluated, g_anchor, atol=1e-12)


def test_gaussian_surrogate_matches_closed_form() -> None:
    with _cluster("gaussian") as cluster:
        fam = cluster.fam
        master = cluster.master_data
        anchor = np.array([0.2, 0.1, 0.0, 0.0, 0.4])
        g_anchor, _ = cluster.global_gradient(anchor)
        surrogate = SurrogateLoss.collaborative(cluster, anchor, g_anchor)
        point = np.array([-0.3, 0.5, 1.0, 0.2, 0.0])

        shift = g_anchor - gradient(fam, anchor, master)
        expected_value = loss(fam, point, master) + shift @ point
        expected_grad = master.X.T @ (master.X @ point - master.y) / master.n + shift
        assert surrogate.value(point) == pytest.approx(expected_value, abs=1e-12)
        assert np.allclose(surrogate.gradient(point), expected_grad, atol=1e-12)
        assert surrogate.n_eff == cluster.n_total


def test_local_surrogate_is_the_master_loss() -> None:
    with _cluster("logistic") as cluster:
        surrogate = SurrogateLoss.local(cluster)
        point = np.array([0.3, -0.2, 0.1, 0.0, 0.5])
        assert surrogate.value(point) == pytest.approx(loss(cluster.fam, point, cluster.master_data))
        assert surrogate.n_eff == cluster.master_n
        assert cluster.comm.rounds == 0


def test_curvature_bound_matches_largest_eigenvalue() -> None:
    with _cluster("gaussian") as cluster:
        master = cluster.master_data
        surrogate = SurrogateLoss.local(cluster)
        top = float(np.linalg.eigvalsh(master.X.T @ master.X / master.n)[-1])
        assert surrogate.curvature_bound() == pytest.approx(top, rel=1e-3)


def test_hbic_counts_nuisance_support_only() -> None:
    data = SiteData(X=np.eye(4)[[0, 1, 2, 3, 0, 1, 2, 3]], y=np.zeros(8))
    fam = GlmFamily.of("gaussian")
    with Cluster.from_sites([data], fam) as cluster:
        anchor = np.zeros(4)
        g_anchor, _ = cluster.global_gradient(anchor)
        sparse = np.array([1.0, 0.0, 0.0, 0.0])
        dense = np.array([1.0, 1.0, 0.0, 0.0])
        penalty = np.log(np.log(8)) * np.log(4)
        base = 2 * 8 * loss(fam, sparse, data)
        assert hbic_score(cluster, anchor, g_anchor, sparse, target_idx=[0]) == pytest.approx(base)
        with_one = 2 * 8 * loss(fam, dense, data) + penalty
        assert hbic_score(cluster, anchor, g_anchor, dense, target_idx=[0]) == pytest.approx(with_one)


def _wide_cluster() -> Cluster:
    fam = GlmFamily.of("gaussian")
    beta = np.zeros(80)
    beta[[2, 5]] = (1.0, -1.0)
    sigma = CovarianceSpec.toeplitz(80, 0.5)
    sites = [simulate(fam, beta, 30, sigma, np.random.SeedSequence(5, spawn_key=(k,))) for k in range(3)]
    return Cluster.from_sites(sites, fam)


def test_hbic_never_selects_beyond_the_support_cap() -> None:
    cfg = StageConfig()
    with _wide_cluster() as cluster:
        g_anchor, _ = cluster.global_gradient(np.zeros(80))
        surrogate = SurrogateLoss.collaborative(cluster, np.zeros(80), g_anchor)
        grid = lambda_grid(lambda_max(SurrogateLoss.local(cluster), ()), 30, 1e-3)

        def weights(lam: float) -> np.ndarray:
            return np.full(80, lam)

        path = hbic_path(surrogate, weights, grid, (), None, np.zeros(80), cfg, max_support=15)
        _, chosen = select_by_hbic(surrogate, weights, grid, (), None, np.zeros(80), cfg, max_support=15)

        assert path[-1].support_size > 15
        assert np.count_nonzero(chosen) <= 15
        assert np.isfinite(chosen).all()
        with pytest.raises(Diverged):
            select_by_hbic(surrogate, weights, (grid[-1],), (), None, np.zeros(80), cfg, max_support=0)


def test_hbic_prefers_the_true_support_over_the_full_fit() -> None:
    fam = GlmFamily.of("gaussian")
    beta = np.zeros(50)
    beta[[3, 4, 10]] = (1.0, 1.0, -0.8)
    data = simulate(fam, beta, 500, CovarianceSpec.toeplitz(50, 0.5), 23)
    oracle = np.zeros(50)
    support = [3, 4, 10]
    oracle[support], *_ = np.linalg.lstsq(data.X[:, support], data.y, rcond=None)
    full, *_ = np.linalg.lstsq(data.X, data.y, rcond=None)
    with Cluster.from_sites([data], fam) as cluster:
        g_anchor, _ = cluster.global_gradient(np.zeros(50))
        oracle_score = hbic_score(cluster, np.zeros(50), g_anchor, oracle)
        full_score = hbic_score(cluster, np.zeros(50), g_anchor, full)
    assert loss(fam, full, data) <= loss(fam, oracle, data)
    assert oracle_score < full_score
