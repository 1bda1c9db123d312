"""Monte Carlo rejection rates, oracle agreement and power curves."""

from __future__ import annotations

import logging
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from collab_score.cluster import ClusterSettings
from collab_score.errors import CollabScoreError, MonteCarloAborted
from collab_score.harness.config import HarnessSettings, SimConfig
from collab_score.harness.scenes import coordinate_order, deviation, hypothesis_constraint, make_scene, true_beta
from collab_score.inference import LinearHypothesis, TestReport, asymptotic_power, build_omega_blocks, cst_test, ocst_test
from collab_score.model import CovarianceSpec, GlmFamily
from collab_score.solver import run_two_stage

logger = logging.getLogger(__name__)

MAX_FAILURE_SHARE = 0.05
AGREEMENT_TOL = 1e-8

# LinAlgError and floating-point traps from numpy count as numerical failures of one replication.
_REPLICATION_FAILURES = (CollabScoreError, np.linalg.LinAlgError, ArithmeticError)

ReportSink = Callable[[int, TestReport, TestReport | None], None]


@dataclass(slots=True)
class ReplicationOutcome:
    rep: int
    cst: TestReport | None = None
    ocst: TestReport | None = None
    error: str | None = None
    selected: tuple[int, ...] = ()
    truth: tuple[int, ...] = ()

    @property
    def ok(self) -> bool:
        return self.cst is not None

    @property
    def recovered(self) -> bool:
        """Selected nuisance support equals the true one, both in natural coordinates."""
        return self.ok and self.selected == self.truth

    @property
    def agrees(self) -> bool | None:
        if self.cst is None or self.ocst is None:
            return None
        gap = abs(self.cst.statistic - self.ocst.statistic)
        return gap <= AGREEMENT_TOL * max(1.0, self.cst.statistic)


@dataclass(slots=True)
class McResult:
    scenario: str
    h: float
    alphas: tuple[float, ...]
    rejection_rate: dict[float, float]
    p_values: np.ndarray
    mean_support_size: float
    mean_rounds: float
    wall_time: float
    oracle_rejection_rate: dict[float, float] | None = None
    oracle_p_values: np.ndarray | None = None
    agreement: float | None = None
    support_recovery: float | None = None
    failures: int = 0
    failed_reps: list[int] = field(default_factory=list)

    @property
    def replications(self) -> int:
        return int(self.p_values.shape[0])

    def summary(self) -> dict[str, object]:
        return {
            "scenario": self.scenario,
            "h": self.h,
            "replications": self.replications,
            "rejection_rate": {f"{a:g}": r for a, r in self.rejection_rate.items()},
            "oracle_rejection_rate": (
                None
                if self.oracle_rejection_rate is None
                else {f"{a:g}": r for a, r in self.oracle_rejection_rate.items()}
            ),
            "agreement": self.agreement,
            "support_recovery": self.support_recovery,
            "mean_support_size": self.mean_support_size,
            "mean_rounds": self.mean_rounds,
            "failures": self.failures,
            "wall_time": self.wall_time,
        }


def rejection_rates(p_values: np.ndarray, alphas: Sequence[float]) -> dict[float, float]:
    """#{p < alpha} / R for each alpha."""
    total = int(p_values.shape[0])
    if total == 0:
        return {float(a): float("nan") for a in alphas}
    return {float(a): int(np.count_nonzero(p_values < a)) / total for a in alphas}


def run_replication(cfg: SimConfig, rep: int, cluster_settings: ClusterSettings | None = None) -> ReplicationOutcome:
    """make_scene -> run_two_stage -> cst_test (-> ocst_test). Numerical failures are recorded."""
    try:
        scene = make_scene(cfg, rep, cluster_settings)
    except _REPLICATION_FAILURES as exc:
        return ReplicationOutcome(rep=rep, error=f"{type(exc).__name__}: {exc}")
    stage_cfg = cfg.stage_config()
    with scene.cluster as cluster:
        try:
            fitted = run_two_stage(cluster, scene.hypothesis, cfg.penalty, stage_cfg)
            report = cst_test(cluster, fitted, scene.hypothesis, cfg.variance_mode, cfg.alphas)
            oracle = None
            if cfg.run_oracle:
                oracle = ocst_test(
                    cluster,
                    scene.hypothesis,
                    scene.true_support,
                    stage_cfg,
                    cfg.variance_mode,
                    cfg.alphas,
                    two_stage=fitted,
                )
        except _REPLICATION_FAILURES as exc:
            logger.warning("replication %d failed: %s", rep, exc)
            return ReplicationOutcome(rep=rep, error=f"{type(exc).__name__}: {exc}")
    return ReplicationOutcome(
        rep=rep,
        cst=report,
        ocst=oracle,
        selected=scene.natural_support(report.support),
        truth=scene.natural_support(scene.true_support),
    )


def run_monte_carlo(
    cfg: SimConfig,
    settings: HarnessSettings | None = None,
    on_report: ReportSink | None = None,
) -> McResult:
    """Independent replications on a thread pool; aggregation is ordered by replication index."""
    resolved = settings or HarnessSettings.from_env()
    cluster_settings = ClusterSettings.from_env()
    started = time.perf_counter()
    reps = range(cfg.replications)
    if resolved.workers <= 1 or cfg.replications == 1:
        outcomes = [run_replication(cfg, rep, cluster_settings) for rep in reps]
    else:
        with ThreadPoolExecutor(max_workers=resolved.workers, thread_name_prefix="mc-rep") as pool:
            futures = [pool.submit(run_replication, cfg, rep, cluster_settings) for rep in reps]
            outcomes = [future.result() for future in futures]
    outcomes.sort(key=lambda outcome: outcome.rep)

    failed = [outcome.rep for outcome in outcomes if not outcome.ok]
    if len(failed) > MAX_FAILURE_SHARE * cfg.replications:
        first = next(outcome.error for outcome in outcomes if not outcome.ok)
        raise MonteCarloAborted(
            f"{len(failed)} of {cfg.replications} replications failed (first: {first})"
        )
    if failed:
        logger.warning("%d replications failed and were dropped: %s", len(failed), failed)

    good = [outcome for outcome in outcomes if outcome.ok]
    if on_report is not None:
        for outcome in good:
            on_report(outcome.rep, outcome.cst, outcome.ocst)

    p_values = np.array([outcome.cst.p_value for outcome in good], dtype=float)
    alphas = tuple(float(a) for a in cfg.alphas)
    oracle_p: np.ndarray | None = None
    oracle_rates: dict[float, float] | None = None
    agreement: float | None = None
    if cfg.run_oracle and good:
        oracle_p = np.array([outcome.ocst.p_value for outcome in good], dtype=float)
        oracle_rates = rejection_rates(oracle_p, alphas)
        agreement = float(np.mean([bool(outcome.agrees) for outcome in good]))

    result = McResult(
        scenario=cfg.label,
        h=cfg.h,
        alphas=alphas,
        rejection_rate=rejection_rates(p_values, alphas),
        p_values=p_values,
        mean_support_size=float(np.mean([len(o.cst.support) for o in good])) if good else float("nan"),
        mean_rounds=float(np.mean([o.cst.comm.rounds for o in good])) if good else float("nan"),
        wall_time=time.perf_counter() - started,
        oracle_rejection_rate=oracle_rates,
        oracle_p_values=oracle_p,
        agreement=agreement,
        support_recovery=float(np.mean([o.recovered for o in good])) if good else None,
        failures=len(failed),
        failed_reps=failed,
    )
    logger.info(
        "%s h=%g: rejection %s over %d replications (%.1fs)",
        result.scenario,
        result.h,
        result.rejection_rate,
        result.replications,
        result.wall_time,
    )
    return result


def population_variance(cfg: SimConfig, n_draws: int = 200_000, seed: int = 20_231_206) -> np.ndarray:
    """V at the null beta* on b = (theta, gamma_S), from the population J0 = K0.

    Both families are correctly specified with unit dispersion, so K0 = J0.
    Gaussian J0 is Sigma_bb; logistic J0 = E[b''(x^T beta) x_b x_b^T] by Monte Carlo.
    """
    beta = true_beta(cfg.hypothesis, cfg.p, 0.0)
    order = coordinate_order(cfg.hypothesis, cfg.p)
    c_mat, _ = hypothesis_constraint(cfg.hypothesis)
    d = c_mat.shape[1]
    support = [order[j] for j in range(d, cfg.p) if beta[order[j]] != 0.0]
    natural_b = list(order[:d]) + support
    sigma_bb = CovarianceSpec.toeplitz(cfg.p, cfg.rho).dense()[np.ix_(natural_b, natural_b)]
    if cfg.family == "gaussian":
        j0 = sigma_bb
    else:
        rng = np.random.default_rng(seed)
        x_b = rng.multivariate_normal(np.zeros(len(natural_b)), sigma_bb, size=n_draws)
        weights = GlmFamily.of(cfg.family).variance(x_b @ beta[natural_b])
        j0 = (x_b * weights[:, None]).T @ x_b / n_draws
        j0 = 0.5 * (j0 + j0.T)
    _, v_mat = build_omega_blocks(j0, j0, c_mat, len(support))
    return v_mat


@dataclass(frozen=True, slots=True)
class PowerPoint:
    h: float
    empirical: float
    oracle: float | None
    theoretical: float


def power_curve(
    cfg: SimConfig,
    h_grid: Sequence[float] | None = None,
    settings: HarnessSettings | None = None,
    alpha: float | None = None,
) -> tuple[list[PowerPoint], list[McResult]]:
    """Empirical CST power over h next to P(chi2(r, e_N) > chi2_alpha(r))."""
    level = float(alpha if alpha is not None else cfg.alphas[0])
    grid = list(h_grid) if h_grid is not None else cfg.resolved_h_grid()
    levels = sorted(set(cfg.alphas) | {level})
    base = cfg.model_copy(update={"alphas": levels})
    v_mat = population_variance(base)
    c_mat, t_vec = hypothesis_constraint(cfg.hypothesis)
    hypothesis = LinearHypothesis(C=c_mat, t=t_vec, target_idx=tuple(range(c_mat.shape[1])))
    points: list[PowerPoint] = []
    results: list[McResult] = []
    for h in grid:
        result = run_monte_carlo(base.at(h), settings)
        results.append(result)
        theoretical = asymptotic_power(hypothesis, v_mat, deviation(cfg.hypothesis, h), cfg.n_total, level)
        oracle = None if result.oracle_rejection_rate is None else result.oracle_rejection_rate[level]
        points.append(
            PowerPoint(h=float(h), empirical=result.rejection_rate[level], oracle=oracle, theoretical=theoretical)
        )
    return points, results
