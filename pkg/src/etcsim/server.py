"""HTTP service wrapping the toolkit: simulate, bench, certify, dwell.

Every endpoint accepts the raw config text, runs the corresponding
operation, and returns structured results plus the rendered text artifact.
Configuration and solver errors map to 400 with the message as detail.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__, ops
from .bench import BenchError
from .certificates import CertificateError
from .config import ConfigError, parse_config
from .hybrid import HybridError
from .schemas import (
    BenchResponse,
    BenchRow,
    CertifyResponse,
    CheckLine,
    ConfigRequest,
    DwellResponse,
    HealthResponse,
    SimulateResponse,
    json_float,
)

__all__ = ["app", "create_app"]

_CLIENT_ERRORS = (ConfigError, HybridError, BenchError, CertificateError, ValueError)


def create_app() -> FastAPI:
    app = FastAPI(title="etcsim", version=__version__)

    def parsed(req: ConfigRequest):
        try:
            return parse_config(req.config)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: ConfigRequest) -> SimulateResponse:
        cfg = parsed(req)
        try:
            result = ops.simulate_run(cfg)
        except _CLIENT_ERRORS as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        arc = result.arc
        return SimulateResponse(
            executions=arc.executions,
            final_time=arc.final_time,
            final_state=[float(v) for v in arc.final_state],
            min_dwell=json_float(arc.min_dwell()),
            csv=result.csv,
        )

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: ConfigRequest) -> BenchResponse:
        cfg = parsed(req)
        try:
            summary, csv = ops.bench_run(cfg)
        except _CLIENT_ERRORS as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        rows = [
            BenchRow(
                policy=pol.spec.kind,
                param=pol.spec.param,
                avg_executions=pol.avg_executions,
                min_dwell=json_float(pol.min_dwell),
                max_flow_violation=json_float(pol.max_flow_violation),
                max_jump_violation=json_float(pol.max_jump_violation),
                max_envelope_excess=json_float(pol.max_envelope_excess),
                max_final_abs_x=pol.max_final_abs_x,
            )
            for pol in summary.policies
        ]
        return BenchResponse(rows=rows, csv=csv)

    @app.post("/certify", response_model=CertifyResponse)
    def certify(req: ConfigRequest) -> CertifyResponse:
        cfg = parsed(req)
        try:
            result = ops.certify_run(cfg)
        except _CLIENT_ERRORS as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return CertifyResponse(
            passed=result.passed,
            checks=[
                CheckLine(name=c.name, passed=c.passed, worst=c.worst, location=c.location)
                for c in result.checks
            ],
            report=result.report,
        )

    @app.post("/dwell", response_model=DwellResponse)
    def dwell(req: ConfigRequest) -> DwellResponse:
        cfg = parsed(req)
        try:
            result = ops.dwell_run(cfg)
        except _CLIENT_ERRORS as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return DwellResponse(
            kind=result.kind,
            l1=result.estimates.l1,
            l2=result.estimates.l2,
            l3=result.estimates.l3,
            a=result.a,
            b=result.b,
            tau=result.tau,
            b_inflated=result.b_inflated,
            tau_inflated=result.tau_inflated,
            report=result.report(cfg),
        )

    return app


app = create_app()
