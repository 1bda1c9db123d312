"""Simulated multi-site scenes: design, truth and hypothesis per replication."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from collab_score.cluster import Cluster, ClusterSettings
from collab_score.errors import InvalidConfig
from collab_score.harness.config import SimConfig
from collab_score.inference import LinearHypothesis
from collab_score.model import CovarianceSpec, GlmFamily, SiteData, simulate

# Tested coordinates in the natural (unpermuted) order.
HYPOTHESIS_TARGETS: dict[str, tuple[int, ...]] = {
    "H1_univariate": (0,),
    "H2_multivariate": (0, 1, 2),
    "H3_contrast": (3, 4),
}


def hypothesis_constraint(name: str) -> tuple[np.ndarray, np.ndarray]:
    if name == "H1_univariate":
        return np.array([[1.0]]), np.zeros(1)
    if name == "H2_multivariate":
        return np.eye(3), np.zeros(3)
    if name == "H3_contrast":
        return np.array([[1.0, -1.0]]), np.zeros(1)
    raise InvalidConfig(f"unknown hypothesis {name!r}")


def true_beta(name: str, p: int, h: float) -> np.ndarray:
    """beta* in natural coordinates: (h,0,0,1,1,0...) or (0,0,0,1+h,1,0...)."""
    if p < 5:
        raise InvalidConfig(f"scenes need p >= 5, got {p}")
    beta = np.zeros(p)
    beta[3] = 1.0
    beta[4] = 1.0
    if name == "H3_contrast":
        beta[3] += h
    elif name in ("H1_univariate", "H2_multivariate"):
        beta[0] = h
    else:
        raise InvalidConfig(f"unknown hypothesis {name!r}")
    return beta


def deviation(name: str, h: float) -> np.ndarray:
    """C theta* - t for the scene at deviation h."""
    if name == "H2_multivariate":
        return np.array([h, 0.0, 0.0])
    return np.array([h])


def coordinate_order(name: str, p: int) -> tuple[int, ...]:
    """Tested coordinates first, then the rest in natural order."""
    target = HYPOTHESIS_TARGETS[name]
    chosen = set(target)
    return target + tuple(j for j in range(p) if j not in chosen)


@dataclass(slots=True)
class Scene:
    """One replication. Column j of every site holds natural coordinate permutation[j]."""

    cluster: Cluster
    hypothesis: LinearHypothesis
    beta_star: np.ndarray
    true_support: tuple[int, ...]
    permutation: tuple[int, ...]
    rep: int

    def natural_index(self, column: int) -> int:
        return self.permutation[column]

    def natural_support(self, columns: tuple[int, ...] | list[int]) -> tuple[int, ...]:
        return tuple(sorted(self.natural_index(j) for j in columns))


def site_seed(seed: int, rep: int, site_id: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(rep, site_id))


def simulate_sites(cfg: SimConfig, rep: int) -> tuple[list[SiteData], np.ndarray, tuple[int, ...]]:
    """Per-site data with permuted columns, plus the permuted beta* and permutation."""
    fam = GlmFamily.of(cfg.family)
    beta = true_beta(cfg.hypothesis, cfg.p, cfg.h)
    sigma = CovarianceSpec.toeplitz(cfg.p, cfg.rho)
    order = coordinate_order(cfg.hypothesis, cfg.p)
    columns = list(order)
    sites = []
    for site_id in range(cfg.m):
        data = simulate(fam, beta, cfg.n_per_site, sigma, site_seed(cfg.seed, rep, site_id), site_id=site_id)
        sites.append(SiteData(X=data.X[:, columns], y=data.y, site_id=site_id))
    return sites, beta[columns], order


def make_scene(cfg: SimConfig, rep: int, settings: ClusterSettings | None = None) -> Scene:
    if rep < 0:
        raise InvalidConfig(f"replication index must be >= 0, got {rep}")
    sites, beta_star, order = simulate_sites(cfg, rep)
    c_mat, t_vec = hypothesis_constraint(cfg.hypothesis)
    d = c_mat.shape[1]
    hypothesis = LinearHypothesis(C=c_mat, t=t_vec, target_idx=tuple(range(d)))
    support = tuple(j for j in range(d, cfg.p) if beta_star[j] != 0.0)
    cluster = Cluster.from_sites(sites, GlmFamily.of(cfg.family), cfg.transport, settings)
    return Scene(
        cluster=cluster,
        hypothesis=hypothesis,
        beta_star=beta_star,
        true_support=support,
        permutation=order,
        rep=rep,
    )
