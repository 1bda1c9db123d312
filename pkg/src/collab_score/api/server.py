"""HTTP endpoints for power calculations, chi-square quantiles and small simulations."""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import Response

from collab_score.api.schemas import (
    PowerRequest,
    PowerResponse,
    QuantileRequest,
    QuantileResponse,
    SimulateRequest,
    SimulateResponse,
)
from collab_score.errors import MonteCarloAborted, NumericalError
from collab_score.harness.config import HarnessSettings
from collab_score.harness.monte_carlo import run_monte_carlo
from collab_score.inference import LinearHypothesis, asymptotic_power, noncentrality
from collab_score.numerics import chi2_quantile


def create_app(settings: HarnessSettings | None = None) -> FastAPI:
    app = FastAPI(title="collab-score API", version="0.1.0")
    harness_settings = settings or HarnessSettings.from_env()

    @app.get("/")
    def root() -> dict[str, str]:
        return {
            "service": "collab-score API",
            "status": "ok",
            "docs": "/docs",
        }

    @app.get("/favicon.ico", include_in_schema=False)
    def favicon() -> Response:
        return Response(status_code=204)

    @app.post("/v1/power", response_model=PowerResponse)
    def power(payload: PowerRequest) -> PowerResponse:
        try:
            c_mat = np.asarray(payload.C, dtype=float)
            hyp = LinearHypothesis(C=c_mat, t=np.zeros(c_mat.shape[0]), target_idx=tuple(range(c_mat.shape[1])))
            value = asymptotic_power(hyp, np.asarray(payload.V, dtype=float), np.asarray(payload.h), payload.n, payload.alpha)
            e_n = noncentrality(np.asarray(payload.V, dtype=float), np.asarray(payload.h), payload.n)
            critical = chi2_quantile(payload.alpha, hyp.r)
        except NumericalError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return PowerResponse(power=value, noncentrality=e_n, critical_value=critical)

    @app.post("/v1/chi2/quantile", response_model=QuantileResponse)
    def quantile(payload: QuantileRequest) -> QuantileResponse:
        try:
            value = chi2_quantile(payload.alpha, payload.df)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return QuantileResponse(quantile=value)

    @app.post("/v1/simulate", response_model=SimulateResponse)
    def simulate(payload: SimulateRequest) -> SimulateResponse:
        cfg = payload.config
        if cfg.replications > payload.max_replications:
            raise HTTPException(
                status_code=400,
                detail=f"replications={cfg.replications} exceeds max_replications={payload.max_replications}",
            )
        try:
            result = run_monte_carlo(cfg, harness_settings)
        except (NumericalError, MonteCarloAborted) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        summary = result.summary()
        return SimulateResponse(
            scenario=result.scenario,
            h=result.h,
            replications=result.replications,
            rejection_rate=summary["rejection_rate"],
            oracle_rejection_rate=summary["oracle_rejection_rate"],
            agreement=result.agreement,
            support_recovery=result.support_recovery,
            mean_support_size=result.mean_support_size,
            mean_rounds=result.mean_rounds,
            failures=result.failures,
            wall_time=result.wall_time,
        )

    return app


app = create_app()
