import numpy as np
import pytest

from collab_score.cluster import Cluster
from collab_score.errors import Diverged, InvalidArg, InvalidConfig
from collab_score.harness import SimConfig, make_scene, true_beta
from collab_score.inference import LinearHypothesis
from collab_score.model import CovarianceSpec, GlmFamily, SiteData, simulate
from collab_score.penalty import PenaltySpec, derivative
from collab_score.solver import (
    StageConfig,
    SurrogateLoss,
    default_grid,
    initial_estimator,
    lambda_grid,
    minimize_surrogate,
    nuisance_indices,
    run_oracle_stage,
    run_two_stage,
    select_by_hbic,
)

_BETA = np.array([0.5, 0.5, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
_HYPOTHESIS = LinearHypothesis(C=np.array([[1.0, -1.0]]), t=np.array([0.0]), target_idx=(0, 1))
_CFG = StageConfig(max_outer=40, outer_tol=1e-9, inner_max=50_000, inner_tol=1e-11)


def _noiseless_sites(m: int = 3, n: int = 100) -> list[SiteData]:
    fam = GlmFamily.of("gaussian")
    sigma = CovarianceSpec.toeplitz(_BETA.shape[0], 0.5)
    sites = []
    for k in range(m):
        noisy = simulate(fam, _BETA, n, sigma, np.random.SeedSequence(21, spawn_key=(k,)), site_id=k)
        sites.append(SiteData(X=noisy.X, y=noisy.X @ _BETA, site_id=k))
    return sites


def test_noiseless_gaussian_recovers_truth_under_constraint() -> None:
    with Cluster.from_sites(_noiseless_sites(), GlmFamily.of("gaussian")) as cluster:
        result = run_two_stage(cluster, _HYPOTHESIS, "SCAD", _CFG)

    assert result.support == (3, 4)
    assert np.allclose(result.beta_hat.beta, _BETA, atol=1e-6)
    theta = result.beta_hat.theta()
    assert abs(theta[0] - theta[1]) <= 1e-10
    assert result.initial_beta is not None


def test_each_outer_iteration_costs_one_gradient_round() -> None:
    sites = _noiseless_sites()
    with Cluster.from_sites(sites, GlmFamily.of("gaussian")) as cluster:
        result = run_two_stage(cluster, _HYPOTHESIS, "L1", StageConfig(max_outer=3))

    k_one, k_two = result.iterations
    assert result.comm.rounds == k_one + k_two
    assert result.comm.bytes_to_sites == result.comm.rounds * 3 * 8 * _BETA.shape[0]
    assert len(result.stage_two_anchors) == k_two
    assert len(result.anchor_gradients) == k_two
    assert len(result.anchor_trace) == 1 + k_one + k_two


def test_max_outer_exhaustion_is_reported_not_raised() -> None:
    fam = GlmFamily.of("logistic")
    sigma = CovarianceSpec.toeplitz(_BETA.shape[0], 0.5)
    sites = [simulate(fam, _BETA, 60, sigma, np.random.SeedSequence(4, spawn_key=(k,))) for k in range(3)]
    cfg = StageConfig(max_outer=1, outer_tol=1e-12)
    with Cluster.from_sites(sites, fam) as cluster:
        result = run_two_stage(cluster, _HYPOTHESIS, "MCP", cfg)
    assert result.not_converged
    assert result.iterations == (1, 1)
    assert np.isfinite(result.beta_hat.beta).all()


def test_oracle_stage_reuses_anchors_without_communication() -> None:
    with Cluster.from_sites(_noiseless_sites(), GlmFamily.of("gaussian")) as cluster:
        fitted = run_two_stage(cluster, _HYPOTHESIS, "SCAD", _CFG)
        oracle = run_oracle_stage(
            cluster,
            _HYPOTHESIS,
            (3, 4),
            _CFG,
            anchors=fitted.stage_two_anchors,
            anchor_gradients=fitted.anchor_gradients,
        )
        standalone = run_oracle_stage(cluster, _HYPOTHESIS, (4, 3), _CFG)

    assert oracle.comm.rounds == 0
    assert oracle.support == (3, 4)
    assert np.allclose(oracle.beta_hat.beta, _BETA, atol=1e-6)
    assert standalone.comm.rounds == len(standalone.anchor_trace) - 1
    assert np.allclose(standalone.beta_hat.beta, _BETA, atol=1e-6)


def test_oracle_support_must_be_nuisance() -> None:
    with Cluster.from_sites(_noiseless_sites(m=1), GlmFamily.of("gaussian")) as cluster:
        with pytest.raises(InvalidArg):
            run_oracle_stage(cluster, _HYPOTHESIS, (0, 3))


def test_stage_config_validation() -> None:
    with pytest.raises(InvalidConfig):
        StageConfig(lambda_grid=(0.1, 0.2)).validate()
    with pytest.raises(InvalidConfig):
        StageConfig(lambda_grid=()).validate()
    with pytest.raises(InvalidConfig):
        StageConfig(outer_tol=0.0).validate()
    grid = lambda_grid(2.0, 30, 0.01)
    assert len(grid) == 30
    assert grid[0] == pytest.approx(2.0) and grid[-1] == pytest.approx(0.02)
    assert all(later < earlier for earlier, later in zip(grid, grid[1:]))


def test_more_coordinates_than_master_rows_stays_sparse_and_bounded() -> None:
    cfg = SimConfig(m=4, n_per_site=40, p=120, h=0.0)
    for rep in range(3):
        scene = make_scene(cfg, rep)
        with scene.cluster as cluster:
            result = run_two_stage(cluster, scene.hypothesis, "SCAD", StageConfig())
            cap = cluster.master_n // 2
        assert len(result.support) <= cap
        assert np.isfinite(result.beta_hat.beta).all()
        assert float(np.max(np.abs(result.beta_hat.beta))) < 10.0


def test_runaway_iterates_raise_instead_of_returning() -> None:
    with Cluster.from_sites(_noiseless_sites(), GlmFamily.of("gaussian")) as cluster:
        with pytest.raises(Diverged):
            run_two_stage(cluster, _HYPOTHESIS, "SCAD", StageConfig(divergence_bound=0.5))
    with pytest.raises(InvalidConfig):
        StageConfig(divergence_bound=0.0).validate()


@pytest.mark.parametrize("seed", range(20))
def test_noiseless_five_site_fit_recovers_the_nuisance_support(seed: int) -> None:
    beta = true_beta("H1_univariate", 50, 0.0)
    fam = GlmFamily.of("gaussian")
    sigma = CovarianceSpec.toeplitz(50, 0.5)
    sites = []
    for k in range(5):
        noisy = simulate(fam, beta, 200, sigma, np.random.SeedSequence(seed, spawn_key=(k,)), site_id=k)
        sites.append(SiteData(X=noisy.X, y=noisy.X @ beta, site_id=k))
    hypothesis = LinearHypothesis(C=np.array([[1.0]]), t=np.zeros(1), target_idx=(0,))
    with Cluster.from_sites(sites, fam) as cluster:
        result = run_two_stage(cluster, hypothesis, "SCAD", StageConfig())

    assert result.support == (3, 4)
    assert float(np.linalg.norm(result.beta_hat.beta - beta)) <= 0.05


def _centralized_two_stage(cluster: Cluster, hypothesis: LinearHypothesis, cfg: StageConfig) -> np.ndarray:
    """The same two stages run on one machine's own loss, with no gradient rounds."""
    target = list(hypothesis.target_idx)
    nuisance = nuisance_indices(cluster.p, target)
    constraint = (hypothesis.C, hypothesis.t)
    cap = cluster.master_n // 2
    grid = default_grid(cluster, target, cfg)
    _, beta = initial_estimator(cluster, target, grid, cfg)
    for _ in range(cfg.max_outer):
        local = SurrogateLoss.local(cluster, beta)
        _, updated = select_by_hbic(
            local, lambda lam: np.full(len(nuisance), lam), grid, target, None, beta, cfg, max_support=cap
        )
        done = float(np.linalg.norm(updated - beta)) < cfg.outer_tol
        beta = updated
        if done:
            break
    template = PenaltySpec.of("SCAD", 0.0)
    lam_two: float | None = None
    for _ in range(cfg.max_outer):
        local = SurrogateLoss.local(cluster, beta)
        magnitudes = np.abs(beta[nuisance])

        def reweighted(lam: float, magnitudes: np.ndarray = magnitudes) -> np.ndarray:
            return np.asarray(derivative(template.with_lambda(lam), magnitudes), dtype=float)

        if lam_two is None:
            lam_two, updated = select_by_hbic(local, reweighted, grid, target, constraint, beta, cfg, max_support=cap)
        else:
            updated = minimize_surrogate(
                local, reweighted(lam_two), target, constraint, beta, inner_max=cfg.inner_max, tol=cfg.inner_tol
            )
        done = float(np.linalg.norm(updated - beta)) < cfg.outer_tol
        beta = updated
        if done:
            break
    return beta


def test_single_site_run_equals_centralized_fit_on_pooled_data() -> None:
    parts = _noiseless_sites(m=3, n=60)
    rng = np.random.default_rng(4)
    pooled = SiteData(
        X=np.vstack([part.X for part in parts]),
        y=np.concatenate([part.X @ _BETA + 0.3 * rng.standard_normal(part.n) for part in parts]),
    )
    with Cluster.from_sites([pooled], GlmFamily.of("gaussian")) as cluster:
        result = run_two_stage(cluster, _HYPOTHESIS, "SCAD", StageConfig())
        expected = _centralized_two_stage(cluster, _HYPOTHESIS, StageConfig())
        assert cluster.comm.rounds == sum(result.iterations)

    assert np.allclose(result.beta_hat.beta, expected, atol=1e-8)
