"""Seeded Monte-Carlo benchmark over the scalar example loop.

Reproduces the average-executions comparison across triggering policies:
n_runs random initial conditions, a fresh uncertain parameter per run, a
fixed horizon, and one row of summary statistics per policy configuration.
Randomness comes from a SplitMix64 stream so runs are bit-reproducible
across platforms; all policies see the same (x0, d) pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .certificates import example_vi_certificate

__all__ = [
    "BenchError",
    "splitmix64_next",
    "uniform01",
    "draw_stream",
    "PolicySpec",
    "BenchConfig",
    "RunRecord",
    "PolicyResult",
    "BenchSummary",
    "DEFAULT_POLICY_SET",
    "run_table1",
    "render_summary_csv",
    "SUMMARY_HEADER",
]

_MASK64 = (1 << 64) - 1

SUMMARY_HEADER = (
    "policy,param,avg_executions,min_dwell,max_flow_violation,"
    "max_jump_violation,max_final_abs_x"
)


class BenchError(RuntimeError):
    """A benchmark run failed; the message echoes the run index and config."""


def splitmix64_next(state: int) -> tuple[int, int]:
    """One SplitMix64 update: returns (output value, new state), both 64-bit."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return z, state


def uniform01(value: int) -> float:
    """Map a 64-bit value to a double in [0, 1) using the top 53 bits."""
    return (value >> 11) / float(1 << 53)


def draw_stream(seed: int, count: int) -> list[float]:
    """The first ``count`` uniform [0, 1) draws of the stream seeded by seed."""
    state = seed & _MASK64
    out = []
    for _ in range(count):
        value, state = splitmix64_next(state)
        out.append(uniform01(value))
    return out


@dataclass(frozen=True)
class PolicySpec:
    """One benchmark column: a policy kind plus its distinguishing parameter.

    The parameter is the period for ``periodic``, the rate share sigma_bar
    for ``wl``, the initial threshold eta0 for ``eta_threshold``, and the
    gain share sigma for ``iss``.
    """

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in ("periodic", "iss", "wl", "eta_threshold"):
            raise ValueError(f"unknown policy kind {self.kind!r}")


DEFAULT_POLICY_SET: tuple[PolicySpec, ...] = (
    PolicySpec("periodic", 0.368),
    PolicySpec("wl", 1e-3),
    PolicySpec("eta_threshold", 0.1),
    PolicySpec("eta_threshold", 1.0),
    PolicySpec("eta_threshold", 2.0),
)


@dataclass(frozen=True)
class BenchConfig:
    n_runs: int = 200
    t_end: float = 20.0
    seed: int = 42
    x0_range: tuple[float, float] = (-1.0, 1.0)
    d_range: tuple[float, float] = (0.0, 1.0)
    policy_set: tuple[PolicySpec, ...] = DEFAULT_POLICY_SET
    sigma: float = 0.5
    epsilon: float = 1e-6
    delta_gain: float = 0.5
    h: float = 1e-3
    event_tol: float = 1e-9
    guard_tol: float = 1e-9
    max_jumps: int = 100_000

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if not self.x0_range[1] >= self.x0_range[0]:
            raise ValueError("x0_range is empty")
        if not self.d_range[1] >= self.d_range[0]:
            raise ValueError("d_range is empty")
        if not self.policy_set:
            raise ValueError("policy_set must be nonempty")


@dataclass(frozen=True)
class RunRecord:
    run_index: int
    x0: float
    d: float
    executions: int
    min_dwell: float
    final_abs_x: float
    max_flow_violation: float
    max_jump_violation: float
    max_envelope_excess: float
    max_abs_x: float
    max_abs_e: float


def _agg_max(values) -> float:
    """Max ignoring -inf placeholders; nan when nothing was monitored."""
    vals = [v for v in values if v != -math.inf]
    return max(vals) if vals else math.nan


@dataclass(frozen=True)
class PolicyResult:
    spec: PolicySpec
    records: tuple[RunRecord, ...]

    @property
    def avg_executions(self) -> float:
        return sum(r.executions for r in self.records) / len(self.records)

    @property
    def min_dwell(self) -> float:
        return min(r.min_dwell for r in self.records)

    @property
    def max_flow_violation(self) -> float:
        return _agg_max(r.max_flow_violation for r in self.records)

    @property
    def max_jump_violation(self) -> float:
        return _agg_max(r.max_jump_violation for r in self.records)

    @property
    def max_envelope_excess(self) -> float:
        return _agg_max(r.max_envelope_excess for r in self.records)

    @property
    def max_final_abs_x(self) -> float:
        return max(r.final_abs_x for r in self.records)

    @property
    def max_abs_x(self) -> float:
        return max(r.max_abs_x for r in self.records)

    @property
    def max_abs_e(self) -> float:
        return max(r.max_abs_e for r in self.records)

    @property
    def monitored(self) -> bool:
        return self.spec.kind != "periodic"


@dataclass(frozen=True)
class BenchSummary:
    config: BenchConfig
    policies: tuple[PolicyResult, ...]

    def by_kind_param(self, kind: str, param: float) -> PolicyResult:
        for pol in self.policies:
            if pol.spec.kind == kind and pol.spec.param == param:
                return pol
        raise KeyError(f"no policy {kind!r} with param {param}")


def _kernel_args(spec: PolicySpec, cfg: BenchConfig, cert) -> tuple:
    """(policy code, eta0, period, sigma_bar, decay_rate, gamma_t) for one column."""
    alpha_bar = cert.alpha.coeff
    gamma_t = cert.gamma_tilde().coeff
    iss_rate = (1.0 - cfg.sigma) * alpha_bar
    if spec.kind == "periodic":
        return _kernel.POLICY_PERIODIC, 0.0, spec.param, 0.0, 0.0, gamma_t
    if spec.kind == "iss":
        # the iss column's parameter is its own gain share
        own = example_vi_certificate(spec.param)
        return (_kernel.POLICY_ISS, 0.0, 0.0, 0.0,
                (1.0 - spec.param) * alpha_bar, own.gamma_tilde().coeff)
    if spec.kind == "wl":
        return (_kernel.POLICY_WL, 1.0, 0.0, spec.param,
                spec.param * alpha_bar, gamma_t)
    return (_kernel.POLICY_ETA, spec.param, 0.0, 0.0,
            min(iss_rate, cfg.delta_gain), gamma_t)


_STATUS_TEXT = {
    _kernel.STATUS_MAX_JUMPS: "max jump count exceeded",
    _kernel.STATUS_NON_FINITE: "non-finite state",
    _kernel.STATUS_DEAD_STATE: "state left both the flow and jump sets",
}


def run_table1(cfg: BenchConfig) -> BenchSummary:
    """Run the paired Monte-Carlo benchmark over every configured policy.

    Run i across all policies uses x0 from draw 2i and d from draw 2i+1 of
    the SplitMix64 stream, so columns are a paired comparison.  Aggregation
    runs in run-index order; the summary is deterministic in the config.
    """
    cert = example_vi_certificate(cfg.sigma)
    gamma_t = cert.gamma_tilde().coeff
    alpha_bar = cert.alpha.coeff
    draws = draw_stream(cfg.seed, 2 * cfg.n_runs)
    x0_lo, x0_hi = cfg.x0_range
    d_lo, d_hi = cfg.d_range
    x0s = [x0_lo + (x0_hi - x0_lo) * draws[2 * i] for i in range(cfg.n_runs)]
    ds = [d_lo + (d_hi - d_lo) * draws[2 * i + 1] for i in range(cfg.n_runs)]

    results = []
    jump_times = np.empty(0)
    for spec in cfg.policy_set:
        code, eta0, period, sigma_bar, decay_rate = _kernel_args(spec, cfg, cert)
        records = []
        for i in range(cfg.n_runs):
            out = _kernel.run_example_vi(
                code, ds[i], x0s[i], eta0, period, sigma_bar, alpha_bar,
                cfg.epsilon, cfg.delta_gain, gamma_t, decay_rate, cfg.h,
                cfg.event_tol, cfg.guard_tol, cfg.t_end, cfg.max_jumps,
                jump_times,
            )
            status = int(out[0])
            if status != _kernel.STATUS_OK:
                raise BenchError(
                    f"run {i} failed ({_STATUS_TEXT.get(status, status)}): "
                    f"policy={spec.kind} param={spec.param} x0={x0s[i]!r} "
                    f"d={ds[i]!r} config={cfg}"
                )
            records.append(
                RunRecord(
                    run_index=i,
                    x0=x0s[i],
                    d=ds[i],
                    executions=int(out[1]),
                    min_dwell=float(out[2]),
                    final_abs_x=abs(float(out[3])),
                    max_flow_violation=float(out[4]),
                    max_jump_violation=float(out[5]),
                    max_envelope_excess=float(out[6]),
                    max_abs_x=float(out[7]),
                    max_abs_e=float(out[8]),
                )
            )
        results.append(PolicyResult(spec=spec, records=tuple(records)))
    return BenchSummary(config=cfg, policies=tuple(results))


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def render_summary_csv(summary: BenchSummary, config_echo=()) -> str:
    """One CSV row of aggregates per policy; byte-deterministic in the config."""
    lines = [f"# {entry}" for entry in config_echo]
    lines.append(SUMMARY_HEADER)
    for pol in summary.policies:
        flow = pol.max_flow_violation
        jump = pol.max_jump_violation
        lines.append(
            ",".join(
                (
                    pol.spec.kind,
                    _fmt(pol.spec.param),
                    _fmt(pol.avg_executions),
                    _fmt(pol.min_dwell),
                    _fmt(flow),
                    _fmt(jump),
                    _fmt(pol.max_final_abs_x),
                )
            )
        )
    return "\n".join(lines) + "\n"
