"""Request and response models of the HTTP service.

Requests carry the raw config text so the service owns parsing and every
client sees identical validation and defaults.  Non-finite floats (inf, nan)
are not valid JSON, so aggregate fields that can be unmeasured or infinite
travel as null.
"""
from __future__ import annotations

import math

from pydantic import BaseModel


def json_float(v: float) -> float | None:
    return v if math.isfinite(v) else None


class HealthResponse(BaseModel):
    status: str
    version: str


class ConfigRequest(BaseModel):
    """Raw config text; empty means all defaults."""

    config: str = ""


class SimulateResponse(BaseModel):
    executions: int
    final_time: float
    final_state: list[float]
    min_dwell: float | None
    csv: str


class BenchRow(BaseModel):
    policy: str
    param: float
    avg_executions: float
    min_dwell: float | None
    max_flow_violation: float | None
    max_jump_violation: float | None
    max_envelope_excess: float | None
    max_final_abs_x: float


class BenchResponse(BaseModel):
    rows: list[BenchRow]
    csv: str


class CheckLine(BaseModel):
    name: str
    passed: bool
    worst: float
    location: str


class CertifyResponse(BaseModel):
    passed: bool
    checks: list[CheckLine]
    report: str


class DwellResponse(BaseModel):
    kind: str
    l1: float
    l2: float
    l3: float
    a: float
    b: float
    tau: float
    b_inflated: float
    tau_inflated: float
    report: str
