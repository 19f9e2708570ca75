"""Event-triggered control: hybrid simulation, triggering policies, certification."""

__version__ = "0.1.0"

from .bench import (
    BenchConfig,
    BenchSummary,
    PolicySpec,
    RunRecord,
    run_table1,
    splitmix64_next,
)
from .certificates import (
    Box,
    CompositeLyapunov,
    DwellTimeBound,
    IssCertificate,
    LipschitzEstimates,
    PowerLaw,
    clarke_dd,
    dwell_lower_bound,
    estimate_lipschitz,
    eta_dwell_rate,
    example_vi_certificate,
    monitor_decrease,
    verify_iss,
    wl_dwell_rate,
)
from .config import Config, parse_config, render_config
from .hybrid import (
    HybridArc,
    HybridSystemDef,
    HybridTime,
    HybridTimeDomain,
    SolverConfig,
    locate_event,
    render_trajectory_csv,
    rk4_step,
    solve,
)
from .policies import (
    EtaPolicyParams,
    IssPolicyParams,
    TriggerPolicy,
    WlPolicyParams,
    build_hybrid_system,
    eta_policy,
    initial_state,
    iss_policy,
    periodic_policy,
    wl_policy,
)
from .systems import (
    Controller,
    PlantModel,
    SampledLoop,
    composed_flow,
    example_vi_loop,
)

__all__ = [
    "__version__",
    "BenchConfig",
    "BenchSummary",
    "Box",
    "CompositeLyapunov",
    "Config",
    "Controller",
    "DwellTimeBound",
    "EtaPolicyParams",
    "HybridArc",
    "HybridSystemDef",
    "HybridTime",
    "HybridTimeDomain",
    "IssCertificate",
    "IssPolicyParams",
    "LipschitzEstimates",
    "PlantModel",
    "PolicySpec",
    "PowerLaw",
    "RunRecord",
    "SampledLoop",
    "SolverConfig",
    "TriggerPolicy",
    "WlPolicyParams",
    "build_hybrid_system",
    "clarke_dd",
    "composed_flow",
    "dwell_lower_bound",
    "estimate_lipschitz",
    "eta_dwell_rate",
    "eta_policy",
    "example_vi_certificate",
    "example_vi_loop",
    "initial_state",
    "iss_policy",
    "locate_event",
    "monitor_decrease",
    "parse_config",
    "periodic_policy",
    "render_config",
    "render_trajectory_csv",
    "rk4_step",
    "run_table1",
    "solve",
    "splitmix64_next",
    "verify_iss",
    "wl_dwell_rate",
    "wl_policy",
]
