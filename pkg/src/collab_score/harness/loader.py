"""Multi-site CSV ingestion and hypothesis documents."""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from collab_score.cluster import Cluster, ClusterSettings, TransportKind
from collab_score.errors import BadHypothesis, EmptySite, IoError, SchemaMismatch
from collab_score.inference import LinearHypothesis
from collab_score.model import GlmFamily, SiteData

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class SiteTable:
    name: str
    frame: pd.DataFrame


def read_site_csv(path: str | Path) -> SiteTable:
    source = Path(path)
    try:
        frame = pd.read_csv(source)
    except pd.errors.EmptyDataError as exc:
        raise EmptySite(f"{source.name} has no header or rows") from exc
    except (OSError, pd.errors.ParserError) as exc:
        raise IoError(f"cannot read {source}: {exc}") from exc
    if frame.shape[1] < 2:
        raise SchemaMismatch(f"{source.name} needs at least one covariate and a response column")
    if frame.shape[0] == 0:
        raise EmptySite(f"{source.name} holds no observations")
    return SiteTable(name=source.name, frame=frame)


def _numeric(table: SiteTable) -> pd.DataFrame:
    try:
        return table.frame.apply(pd.to_numeric, errors="raise").astype(float)
    except (TypeError, ValueError) as exc:
        raise SchemaMismatch(f"{table.name} contains non-numeric values: {exc}") from exc


def to_site_data(tables: Sequence[SiteTable]) -> tuple[list[SiteData], list[str], str]:
    """Unify column order on the largest table, which becomes site 0 (the master).

    The last column of every file is the response and must carry the same name.
    """
    if not tables:
        raise EmptySite("no site files were found")
    ordered = sorted(tables, key=lambda table: (-table.frame.shape[0], table.name))
    master = ordered[0].frame
    response = str(master.columns[-1])
    covariates = [str(c) for c in master.columns[:-1]]
    expected = set(covariates)
    sites = []
    for site_id, table in enumerate(ordered):
        columns = [str(c) for c in table.frame.columns]
        if columns[-1] != response:
            raise SchemaMismatch(f"{table.name} has response {columns[-1]!r}, expected {response!r}")
        if set(columns[:-1]) != expected or len(columns) != len(covariates) + 1:
            missing = sorted(expected - set(columns[:-1]))
            extra = sorted(set(columns[:-1]) - expected)
            raise SchemaMismatch(f"{table.name} covariates differ: missing {missing}, unexpected {extra}")
        values = _numeric(table)
        x = values[covariates].to_numpy()
        y = values[response].to_numpy()
        sites.append(SiteData(X=x, y=y, site_id=site_id))
        logger.info("site %d <- %s (%d rows)", site_id, table.name, x.shape[0])
    return sites, covariates, response


def load_hypothesis(
    path: str | Path,
    covariates: Sequence[str],
    target_spec: Sequence[str] | None = None,
) -> LinearHypothesis:
    """JSON {"C": [[...]], "t": [...], "target": [names or column indices]}."""
    source = Path(path)
    try:
        doc = json.loads(source.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read hypothesis {source}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadHypothesis(f"hypothesis {source} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise BadHypothesis(f"hypothesis {source} must be a JSON object")
    names = list(target_spec) if target_spec else doc.get("target")
    if not names:
        raise BadHypothesis(f"hypothesis {source} names no target columns")
    lookup = {name: k for k, name in enumerate(covariates)}
    target = []
    for entry in names:
        if isinstance(entry, int) and not isinstance(entry, bool):
            if not 0 <= entry < len(covariates):
                raise BadHypothesis(f"target column index {entry} is out of range")
            target.append(entry)
        elif str(entry) in lookup:
            target.append(lookup[str(entry)])
        else:
            raise BadHypothesis(f"target column {entry!r} is not a covariate")
    hyp = LinearHypothesis.from_dict(doc, target_idx=tuple(target))
    hyp.validate(len(covariates))
    return hyp


def site_files(data_dir: str | Path) -> list[Path]:
    root = Path(data_dir)
    if not root.is_dir():
        raise IoError(f"{root} is not a directory")
    files = sorted(root.glob("*.csv"))
    if not files:
        raise EmptySite(f"no CSV files in {root}")
    return files


def load_sites(
    data_dir: str | Path,
    family: GlmFamily | str,
    target_spec: Sequence[str] | None,
    hypothesis_file: str | Path,
    transport: TransportKind | str = TransportKind.IN_PROCESS,
    settings: ClusterSettings | None = None,
) -> tuple[Cluster, LinearHypothesis]:
    fam = family if isinstance(family, GlmFamily) else GlmFamily.of(family)
    tables = [read_site_csv(path) for path in site_files(data_dir)]
    sites, covariates, _ = to_site_data(tables)
    hypothesis = load_hypothesis(hypothesis_file, covariates, target_spec)
    return Cluster.from_sites(sites, fam, transport, settings), hypothesis


def write_site_csv(data: SiteData, path: str | Path, covariates: Sequence[str] | None = None, response: str = "y") -> Path:
    """Inverse of read_site_csv, used to export simulated sites."""
    names = list(covariates) if covariates is not None else [f"x{j}" for j in range(data.p)]
    frame = pd.DataFrame(np.column_stack([data.X, data.y]), columns=[*names, response])
    target = Path(path)
    try:
        frame.to_csv(target, index=False)
    except OSError as exc:
        raise IoError(f"cannot write {target}: {exc}") from exc
    return target
