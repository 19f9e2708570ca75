"""Command implementations shared by the HTTP service and its tests.

Each operation takes an effective Config and returns plain result objects
plus the rendered text artifact (trajectory CSV, summary CSV, report).
Rendering happens here, in one place, so every client sees byte-identical
output for identical configs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bench import BenchSummary, render_summary_csv, run_table1
from .certificates import (
    Box,
    LipschitzEstimates,
    dwell_lower_bound,
    estimate_lipschitz,
    eta_dwell_rate,
    iss_violation_grid,
    wl_dwell_rate,
)
from .config import (
    Config,
    ConfigError,
    build_bench_config,
    build_certificate,
    build_loop,
    build_policy,
    build_solver_config,
    config_echo_lines,
)
from .hybrid import HybridArc, render_trajectory_csv, solve
from .policies import build_hybrid_system, initial_state
from .systems import example_vi_loop

__all__ = [
    "DEFAULT_REGION",
    "SimulateResult",
    "CheckResult",
    "CertifyResult",
    "DwellResult",
    "simulate_run",
    "bench_run",
    "certify_run",
    "dwell_run",
    "lipschitz_over_d",
]

DEFAULT_REGION = Box(-2.0, 2.0, -2.0, 2.0)
_ISS_TOL = 1e-12
INFLATION = 1.1


@dataclass(frozen=True)
class SimulateResult:
    arc: HybridArc
    csv: str
    state_dim: tuple[int, int, int]


def simulate_run(cfg: Config) -> SimulateResult:
    """Solve one closed-loop run under the configured policy; render its CSV."""
    cert = build_certificate(cfg)
    loop = build_loop(cfg)
    policy = build_policy(cfg, cert, loop)
    system = build_hybrid_system(loop, policy)
    q0 = initial_state(loop, policy, cfg.x0)
    arc = solve(system, q0, build_solver_config(cfg))
    composite = policy.composite
    csv = render_trajectory_csv(
        arc,
        system.state_dim,
        value_fn=lambda x: float(cert.V(x)),
        composite_fn=(None if composite is None else
                      (lambda x, e, eta: float(composite.value(x, e, eta)))),
        config_echo=config_echo_lines(cfg),
    )
    return SimulateResult(arc=arc, csv=csv, state_dim=system.state_dim)


def bench_run(cfg: Config) -> tuple[BenchSummary, str]:
    """Run the paired benchmark and render the per-policy summary CSV."""
    summary = run_table1(build_bench_config(cfg))
    csv = render_summary_csv(summary, config_echo=config_echo_lines(cfg))
    return summary, csv


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    location: str


@dataclass(frozen=True)
class CertifyResult:
    checks: tuple[CheckResult, ...]
    report: str

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def certify_run(cfg: Config, region: Box = DEFAULT_REGION, grid_n: int = 201,
                d_grid_n: int = 11) -> CertifyResult:
    """Grid-check the certificate on the configured model.

    Checks the decrease bound over (x, e, d), the two comparison bounds on V
    over x, and that the growth-ratio estimates stay bounded.  The report has
    one line per check: ``<name> <pass|fail> <worst-value> <location>``.
    """
    cert = build_certificate(cfg)
    checks = []

    worst, (wx, we, wd) = iss_violation_grid(
        cert, example_vi_loop, region, (cfg.d_min, cfg.d_max), grid_n, d_grid_n
    )
    checks.append(
        CheckResult(
            "iss_decrease",
            worst <= _ISS_TOL,
            worst,
            f"x={_fmt(wx)};e={_fmt(we)};d={_fmt(wd)}",
        )
    )

    xs = np.linspace(region.x_min, region.x_max, grid_n)
    v_vals = cert.V(xs[:, None])
    lower_margin = v_vals - cert.alpha_v_lower(np.abs(xs))
    idx = int(np.argmin(lower_margin))
    checks.append(
        CheckResult(
            "v_bound_lower",
            float(lower_margin[idx]) >= -_ISS_TOL,
            float(lower_margin[idx]),
            f"x={_fmt(float(xs[idx]))}",
        )
    )
    upper_margin = cert.alpha_v_upper(np.abs(xs)) - v_vals
    idx = int(np.argmin(upper_margin))
    checks.append(
        CheckResult(
            "v_bound_upper",
            float(upper_margin[idx]) >= -_ISS_TOL,
            float(upper_margin[idx]),
            f"x={_fmt(float(xs[idx]))}",
        )
    )

    L = lipschitz_over_d(cfg, region, grid_n, d_grid_n)
    loc = (
        f"x=[{_fmt(region.x_min)},{_fmt(region.x_max)}];"
        f"e=[{_fmt(region.e_min)},{_fmt(region.e_max)}]"
    )
    for name, val in (("lipschitz_l1", L.l1), ("lipschitz_l2", L.l2), ("lipschitz_l3", L.l3)):
        checks.append(CheckResult(name, math.isfinite(val), val, loc))

    lines = [f"# {entry}" for entry in config_echo_lines(cfg)]
    for c in checks:
        lines.append(f"{c.name} {'pass' if c.passed else 'fail'} {_fmt(c.worst)} {c.location}")
    return CertifyResult(checks=tuple(checks), report="\n".join(lines) + "\n")


def lipschitz_over_d(cfg: Config, region: Box, grid_n: int = 201,
                     d_grid_n: int = 11) -> LipschitzEstimates:
    """Componentwise max of the growth estimates over the configured d range."""
    cert = build_certificate(cfg)
    if d_grid_n < 2 or cfg.d_max == cfg.d_min:
        d_values = [cfg.d_min]
    else:
        d_values = list(np.linspace(cfg.d_min, cfg.d_max, d_grid_n))
    l1 = l2 = l3 = 0.0
    for d in d_values:
        est = estimate_lipschitz(example_vi_loop(float(d)), cert, region, grid_n)
        l1, l2, l3 = max(l1, est.l1), max(l2, est.l2), max(l3, est.l3)
    return LipschitzEstimates(l1=l1, l2=l2, l3=l3, region=region, grid_n=grid_n)


@dataclass(frozen=True)
class DwellResult:
    kind: str
    estimates: LipschitzEstimates
    a: float
    b: float
    tau: float
    b_inflated: float
    tau_inflated: float

    def report(self, cfg: Config) -> str:
        lines = [f"# {entry}" for entry in config_echo_lines(cfg)]
        lines.append(f"policy {self.kind}")
        lines.append(
            f"lipschitz l1={_fmt(self.estimates.l1)} l2={_fmt(self.estimates.l2)} "
            f"l3={_fmt(self.estimates.l3)}"
        )
        lines.append(f"dwell a={_fmt(self.a)} b={_fmt(self.b)} tau={_fmt(self.tau)}")
        lines.append(
            f"dwell_inflated factor={_fmt(INFLATION)} b={_fmt(self.b_inflated)} "
            f"tau={_fmt(self.tau_inflated)}"
        )
        return "\n".join(lines) + "\n"


def dwell_run(cfg: Config, region: Box = DEFAULT_REGION, grid_n: int = 201,
              d_grid_n: int = 11) -> DwellResult:
    """Analytic inter-transmission lower bound for the configured policy.

    Only the decreasing-threshold and auxiliary-threshold policies carry a
    comparison rate; the growth constants are grid-estimated over the region
    and d range, and the bound is also reported with constants inflated by
    10% as a safety margin against grid under-estimation.
    """
    if cfg.kind not in ("wl", "eta_threshold"):
        raise ConfigError(
            f"dwell bounds are defined for kinds 'wl' and 'eta_threshold', not {cfg.kind!r}"
        )
    cert = build_certificate(cfg)
    alpha_bar = cert.alpha.coeff
    L = lipschitz_over_d(cfg, region, grid_n, d_grid_n)
    if cfg.kind == "wl":
        rate = wl_dwell_rate(L, cfg.sigma_bar, alpha_bar, cfg.epsilon)
        a, b = 0.0, 1.0
        tau = dwell_lower_bound(rate, a, b)
        L_inf = L.inflated(INFLATION)
        rate_inf = wl_dwell_rate(L_inf, cfg.sigma_bar, alpha_bar, cfg.epsilon)
        b_inf = 1.0
        tau_inf = dwell_lower_bound(rate_inf, a, b_inf)
    else:
        rate = eta_dwell_rate(L)
        a, b = 0.0, 1.0 / L.l2
        tau = dwell_lower_bound(rate, a, b)
        L_inf = L.inflated(INFLATION)
        rate_inf = eta_dwell_rate(L_inf)
        b_inf = 1.0 / L_inf.l2
        tau_inf = dwell_lower_bound(rate_inf, a, b_inf)
    return DwellResult(
        kind=cfg.kind, estimates=L, a=a, b=b, tau=tau,
        b_inflated=b_inf, tau_inflated=tau_inf,
    )
