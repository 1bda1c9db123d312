"""collab-score command line: simulate, test, power-curve, site, serve."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from dataclasses import asdict
from pathlib import Path

from pydantic import ValidationError

from collab_score.cluster import (
    Cluster,
    ClusterSettings,
    InProcessSite,
    SiteHandle,
    SiteServer,
    SiteWorker,
    SocketSite,
    release_sites,
)
from collab_score.errors import CollabScoreError, InvalidArg, IoError, NumericalError
from collab_score.harness.config import HarnessSettings, SimConfig, load_sim_config
from collab_score.harness.emit import emit, power_table, write_table
from collab_score.harness.loader import load_hypothesis, load_sites, read_site_csv, site_files, to_site_data
from collab_score.harness.monte_carlo import McResult, power_curve, run_monte_carlo
from collab_score.inference import CollaborativeScoreTest, LinearHypothesis
from collab_score.model import GlmFamily, SiteData
from collab_score.solver import StageConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_VARIANCE_ALIASES = {"averaged": "averaged_local"}


def _address(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {value!r}")
    return host or "127.0.0.1", int(port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collab-score", description="Collaborative score tests for distributed GLMs")
    parser.add_argument("--log-level", default=None, help="logging level (default: COLLAB_SCORE_LOG_LEVEL or WARNING)")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Monte Carlo rejection rates for a simulated scenario")
    simulate.add_argument("--config", required=True, type=Path)
    simulate.add_argument("--out", required=True, type=Path)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--reps", type=int)
    scale = simulate.add_mutually_exclusive_group()
    scale.add_argument(
        "--paper-scale",
        "--full-scale",
        dest="full_scale",
        action="store_true",
        help="m=20, n=200, p=1000, 500 replications",
    )
    scale.add_argument("--desk-scale", action="store_true", help="m=10, n=100, p=400, 200 replications")
    simulate.add_argument("--h-grid", type=float, nargs="+", help="run every h in the grid instead of the config's h")
    simulate.add_argument("--workers", type=int)
    simulate.add_argument("--format", choices=("csv", "json"), default="csv")

    test = commands.add_parser("test", help="two-stage fit and CST on per-site CSV files")
    test.add_argument("--data-dir", required=True, type=Path)
    test.add_argument("--family", required=True, choices=("gaussian", "logistic"))
    test.add_argument("--hypothesis", required=True, type=Path)
    test.add_argument("--target", nargs="+", help="target column names, overriding the hypothesis file")
    test.add_argument(
        "--variance",
        default="auto",
        choices=("auto", "pooled", "averaged", "averaged_local", "averaged_scalar"),
    )
    test.add_argument("--penalty", default="SCAD", choices=("L1", "SCAD", "MCP"))
    test.add_argument("--alpha", type=float, nargs="+", default=[0.05])
    test.add_argument("--bartlett", action="store_true", help="use the Hessian as the score covariance")
    test.add_argument("--transport", default="inproc", choices=("inproc", "socket"))
    test.add_argument("--listen", action="store_true", help="serve non-master files on loopback sockets")
    test.add_argument("--connect", type=_address, nargs="+", default=[], help="remote sites as host:port")
    test.add_argument("--out", type=Path, help="write the report JSON here as well")

    curve = commands.add_parser("power-curve", help="empirical power next to the asymptotic power function")
    curve.add_argument("--config", required=True, type=Path)
    curve.add_argument("--out", type=Path, help="write per-h tables and power_curve.csv here")
    curve.add_argument("--h-grid", type=float, nargs="+")
    curve.add_argument("--reps", type=int)
    curve.add_argument("--alpha", type=float)
    curve.add_argument("--workers", type=int)

    site = commands.add_parser("site", help="serve one site's data over TCP")
    site.add_argument("--data", required=True, type=Path)
    site.add_argument("--family", required=True, choices=("gaussian", "logistic"))
    site.add_argument("--listen", required=True, type=_address)
    site.add_argument("--site-id", type=int, default=1)

    serve = commands.add_parser("serve", help="HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _harness_settings(workers: int | None) -> HarnessSettings:
    settings = HarnessSettings.from_env()
    if workers is not None:
        return HarnessSettings(workers=max(workers, 1), log_level=settings.log_level)
    return settings


def _load_config(path: Path, seed: int | None, reps: int | None, profile: str | None) -> SimConfig:
    cfg = load_sim_config(path)
    if profile is not None:
        cfg = cfg.with_profile(profile)
    updates = {key: value for key, value in (("seed", seed), ("replications", reps)) if value is not None}
    return SimConfig.model_validate({**cfg.model_dump(), **updates}) if updates else cfg


def _cmd_simulate(args: argparse.Namespace) -> int:
    profile = "paper" if args.full_scale else "desk" if args.desk_scale else None
    cfg = _load_config(args.config, args.seed, args.reps, profile)
    settings = _harness_settings(args.workers)
    grid = args.h_grid if args.h_grid else ([cfg.h] if cfg.h_grid is None else cfg.h_grid)
    results: list[McResult] = [run_monte_carlo(cfg.at(h), settings) for h in grid]
    written = emit(results, args.out, args.format)
    print(json.dumps({"results": [r.summary() for r in results], "files": {k: str(v) for k, v in written.items()}}, indent=2))
    return EXIT_OK


def _cmd_power_curve(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config, None, args.reps, None)
    settings = _harness_settings(args.workers)
    level = args.alpha if args.alpha is not None else cfg.alphas[0]
    points, results = power_curve(cfg, args.h_grid, settings, level)
    summary: dict[str, object] = {"points": [asdict(point) for point in points]}
    if args.out is not None:
        emit(results, args.out)
        summary["power_curve"] = str(write_table(power_table(cfg.label, level, points), args.out / "power_curve.csv"))
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _remote_cluster(args: argparse.Namespace, fam: GlmFamily) -> tuple[Cluster, LinearHypothesis]:
    """Local files hold the master (largest) and any extra in-process sites; --connect adds remote ones."""
    settings = ClusterSettings.from_env()
    tables = [read_site_csv(path) for path in site_files(args.data_dir)]
    sites, covariates, _ = to_site_data(tables)
    hypothesis = load_hypothesis(args.hypothesis, covariates, args.target)
    handles: list[SiteHandle] = [InProcessSite(SiteWorker(site, fam)) for site in sites]
    offset = len(sites)
    try:
        for k, (host, port) in enumerate(args.connect):
            remote = SocketSite(host, port, timeout_sec=settings.socket_timeout_sec)
            handles.append(remote)
            if remote.info().site_id < offset:
                raise InvalidArg(
                    f"remote site {host}:{port} uses site id {remote.info().site_id}; ids below {offset} are local"
                )
            logger.info("connected remote site %d at %s:%d", k, host, port)
        return Cluster(sites[0], handles, fam, "socket", settings), hypothesis
    except Exception:
        release_sites(handles)
        raise


def _cmd_test(args: argparse.Namespace) -> int:
    fam = GlmFamily.of(args.family)
    variance = _VARIANCE_ALIASES.get(args.variance, args.variance)
    if args.connect:
        cluster, hypothesis = _remote_cluster(args, fam)
    else:
        transport = "socket" if args.transport == "socket" or args.listen else "in_process"
        cluster, hypothesis = load_sites(args.data_dir, fam, args.target, args.hypothesis, transport)
    with cluster:
        tester = CollaborativeScoreTest(
            cluster,
            penalty_kind=args.penalty,
            cfg=StageConfig(),
            variance_mode=variance,
            alphas=args.alpha,
            bartlett=args.bartlett,
        )
        report = tester.test(hypothesis)
    text = report.to_json()
    if args.out is not None:
        try:
            args.out.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write report to {args.out}: {exc}") from exc
    print(text)
    return EXIT_OK


def _cmd_site(args: argparse.Namespace) -> int:
    fam = GlmFamily.of(args.family)
    table = read_site_csv(args.data)
    sites, _, _ = to_site_data([table])
    data = SiteData(X=sites[0].X, y=sites[0].y, site_id=args.site_id)
    host, port = args.listen
    server = SiteServer(SiteWorker(data, fam), host=host, port=port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        logger.info("site %d shutting down", args.site_id)
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("collab_score.api.server:app", host=args.host, port=args.port)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "test": _cmd_test,
    "power-curve": _cmd_power_curve,
    "site": _cmd_site,
    "serve": _cmd_serve,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = (args.log_level or HarnessSettings.from_env().log_level).upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, ValidationError, FileNotFoundError, IoError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CollabScoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
