import numpy as np
import pytest

from collab_score.cluster import Cluster
from collab_score.errors import DimensionMismatch, InvalidArg, NegativeArg
from collab_score.inference import LinearHypothesis
from collab_score.model import CovarianceSpec, GlmFamily, SiteData, simulate
from collab_score.solver import StageConfig, SurrogateLoss, minimize_surrogate, nuisance_indices, prox_grad_solve

_BETA = np.array([0.8, -0.4, 0.0, 1.2, 0.0, 0.0])
_TIGHT = {"inner_max": 50_000, "tol": 1e-10}


def _data(family: str = "gaussian", n: int = 200, seed: int = 5) -> SiteData:
    return simulate(GlmFamily.of(family), _BETA, n, CovarianceSpec.toeplitz(6, 0.5), seed)


def _local(data: SiteData, family: str = "gaussian") -> tuple[Cluster, SurrogateLoss]:
    cluster = Cluster.from_sites([data], GlmFamily.of(family))
    return cluster, SurrogateLoss.local(cluster)


def _coordinate_descent_lasso(x: np.ndarray, y: np.ndarray, lam: float, penalized: np.ndarray) -> np.ndarray:
    n, p = x.shape
    beta = np.zeros(p)
    col_sq = (x * x).sum(axis=0) / n
    for _ in range(20_000):
        previous = beta.copy()
        for j in range(p):
            partial = y - x @ beta + x[:, j] * beta[j]
            rho = x[:, j] @ partial / n
            threshold = lam if penalized[j] else 0.0
            beta[j] = np.sign(rho) * max(abs(rho) - threshold, 0.0) / col_sq[j]
        if np.max(np.abs(beta - previous)) < 1e-14:
            break
    return beta


def test_zero_weights_give_least_squares() -> None:
    data = _data()
    cluster, surrogate = _local(data)
    with cluster:
        got = minimize_surrogate(surrogate, np.zeros(6), **_TIGHT)
    expected, *_ = np.linalg.lstsq(data.X, data.y, rcond=None)
    assert np.allclose(got, expected, atol=1e-7)


def test_weighted_l1_matches_coordinate_descent() -> None:
    data = _data()
    cluster, surrogate = _local(data)
    with cluster:
        got = minimize_surrogate(surrogate, np.full(5, 0.1), target_idx=[0], **_TIGHT)
    penalized = np.array([False, True, True, True, True, True])
    expected = _coordinate_descent_lasso(data.X, data.y, 0.1, penalized)
    assert np.allclose(got, expected, atol=1e-5)


def test_constrained_least_squares_solves_kkt_system() -> None:
    data = _data()
    cluster, surrogate = _local(data)
    c_full = np.zeros((1, 6))
    c_full[0, :2] = [1.0, 1.0]
    with cluster:
        got = minimize_surrogate(
            surrogate,
            np.zeros(4),
            target_idx=[0, 1],
            constraint=(np.array([[1.0, 1.0]]), np.array([1.0])),
            **_TIGHT,
        )
    gram = data.X.T @ data.X / data.n
    rhs = data.X.T @ data.y / data.n
    kkt = np.block([[gram, c_full.T], [c_full, np.zeros((1, 1))]])
    solution = np.linalg.solve(kkt, np.concatenate([rhs, [1.0]]))
    assert np.allclose(got, solution[:6], atol=1e-6)
    assert got[0] + got[1] == pytest.approx(1.0, abs=1e-12)


def test_square_constraint_pins_theta() -> None:
    data = _data("logistic")
    cluster, surrogate = _local(data, "logistic")
    with cluster:
        got = minimize_surrogate(
            surrogate,
            np.full(4, 0.02),
            target_idx=[0, 1],
            constraint=(np.eye(2), np.array([0.7, -0.3])),
            **_TIGHT,
        )
    assert np.allclose(got[:2], [0.7, -0.3], atol=1e-12)


def test_objective_trace_is_monotone() -> None:
    data = _data("logistic")
    cluster, surrogate = _local(data, "logistic")
    trace: list[float] = []
    with cluster:
        minimize_surrogate(surrogate, np.full(6, 0.03), trace=trace, **_TIGHT)
    assert len(trace) > 1
    for earlier, later in zip(trace, trace[1:]):
        assert later <= earlier + 1e-12 * (1.0 + abs(earlier))


def test_large_penalty_gives_exact_zeros_and_kkt_holds() -> None:
    data = _data()
    cluster, surrogate = _local(data)
    lam = 0.15
    with cluster:
        got = minimize_surrogate(surrogate, np.full(5, lam), target_idx=[0], **_TIGHT)
        grad = surrogate.gradient(got)
    nuisance = nuisance_indices(6, [0])
    zeros = [j for j in nuisance if got[j] == 0.0]
    active = [j for j in nuisance if got[j] != 0.0]
    assert zeros and active
    assert abs(grad[0]) <= 1e-8
    for j in zeros:
        assert abs(grad[j]) <= lam + 1e-8
    for j in active:
        assert grad[j] == pytest.approx(-lam * np.sign(got[j]), abs=1e-8)


def test_restrict_to_pins_other_nuisance_coordinates() -> None:
    data = _data()
    cluster, surrogate = _local(data)
    with cluster:
        got = minimize_surrogate(surrogate, np.zeros(5), target_idx=[0], restrict_to=[3], **_TIGHT)
    assert np.count_nonzero(got[[1, 2, 4, 5]]) == 0
    assert got[3] != 0.0


def test_argument_errors() -> None:
    data = _data()
    cluster, surrogate = _local(data)
    with cluster:
        with pytest.raises(DimensionMismatch):
            minimize_surrogate(surrogate, np.zeros(4), target_idx=[0])
        with pytest.raises(NegativeArg):
            minimize_surrogate(surrogate, np.full(5, -1.0), target_idx=[0])
        with pytest.raises(InvalidArg):
            minimize_surrogate(surrogate, np.zeros(5), target_idx=[9])
        with pytest.raises(InvalidArg):
            minimize_surrogate(surrogate, np.zeros(5), target_idx=[0], restrict_to=[0])


def test_prox_grad_solve_honours_hypothesis_constraint() -> None:
    fam = GlmFamily.of("gaussian")
    sigma = CovarianceSpec.toeplitz(6, 0.5)
    sites = [simulate(fam, _BETA, 80, sigma, np.random.SeedSequence(2, spawn_key=(k,))) for k in range(3)]
    hypothesis = LinearHypothesis(C=np.array([[1.0, -1.0]]), t=np.array([0.5]), target_idx=(0, 1))
    cfg = StageConfig(inner_tol=1e-10, inner_max=20_000)
    with Cluster.from_sites(sites, fam) as cluster:
        anchor = np.zeros(6)
        g_anchor, _ = cluster.global_gradient(anchor)
        constrained = prox_grad_solve(cluster, anchor, g_anchor, np.full(4, 0.05), hypothesis, cfg=cfg)
        free = prox_grad_solve(cluster, anchor, g_anchor, np.full(4, 0.05), hypothesis, cfg=cfg, constrained=False)
    assert constrained[0] - constrained[1] == pytest.approx(0.5, abs=1e-10)
    assert abs(free[0] - free[1] - 0.5) > 1e-6


@pytest.mark.parametrize("seed", range(20))
def test_random_l1_instances_match_coordinate_descent(seed: int) -> None:
    rng = np.random.default_rng(seed)
    p = int(rng.integers(3, 21))
    n = 80
    x = rng.standard_normal((n, p))
    coef = np.where(rng.random(p) < 0.3, rng.normal(0.0, 1.5, p), 0.0)
    y = x @ coef + 0.5 * rng.standard_normal(n)
    lam = float(rng.uniform(0.02, 0.3))
    with Cluster.from_sites([SiteData(X=x, y=y)], GlmFamily.of("gaussian")) as cluster:
        got = minimize_surrogate(SurrogateLoss.local(cluster), np.full(p, lam), **_TIGHT)
    expected = _coordinate_descent_lasso(x, y, lam, np.ones(p, dtype=bool))
    assert np.allclose(got, expected, atol=1e-5)
