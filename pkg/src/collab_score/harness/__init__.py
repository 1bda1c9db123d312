"""Simulation scenes, Monte Carlo experiments, data ingestion and the CLI."""

from collab_score.harness.config import (
    DESK_SCALE,
    FULL_SCALE,
    PAPER_SCALE,
    TABULATED_H_GRIDS,
    HarnessSettings,
    SimConfig,
    load_sim_config,
    scaled_h_grid,
)
from collab_score.harness.emit import emit, p_value_table, power_table, qq_table, rejection_table
from collab_score.harness.loader import load_hypothesis, load_sites, read_site_csv, to_site_data, write_site_csv
from collab_score.harness.monte_carlo import (
    McResult,
    PowerPoint,
    ReplicationOutcome,
    population_variance,
    power_curve,
    rejection_rates,
    run_monte_carlo,
    run_replication,
)
from collab_score.harness.scenes import Scene, make_scene, true_beta

__all__ = [
    "DESK_SCALE",
    "FULL_SCALE",
    "HarnessSettings",
    "McResult",
    "PAPER_SCALE",
    "PowerPoint",
    "ReplicationOutcome",
    "Scene",
    "SimConfig",
    "TABULATED_H_GRIDS",
    "emit",
    "load_hypothesis",
    "load_sim_config",
    "load_sites",
    "make_scene",
    "p_value_table",
    "population_variance",
    "power_curve",
    "power_table",
    "qq_table",
    "read_site_csv",
    "rejection_rates",
    "rejection_table",
    "run_monte_carlo",
    "run_replication",
    "scaled_h_grid",
    "to_site_data",
    "true_beta",
    "write_site_csv",
]
