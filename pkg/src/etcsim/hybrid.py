"""Hybrid-system core: state flows on a flow set, resets on a jump set.

A hybrid system is described by four callables over a flat state vector q:
a flow map (q -> dq/dt), a jump map (q -> q+), and two scalar guards that
encode set membership by sign.  ``flow_guard(q) <= 0`` means q may flow,
``jump_guard(q) >= 0`` means q may jump.  Solutions live on hybrid time
domains: a continuous time t paired with a jump counter j.

The solver is deliberately plain: classical fixed-step RK4 between events,
bisection to localize guard crossings, jump-priority whenever both sets
admit the state.  Everything is deterministic; identical inputs produce
bit-identical arcs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "HybridError",
    "NonFiniteDynamics",
    "BracketError",
    "MaxJumpsExceeded",
    "DeadState",
    "HybridTime",
    "HybridTimeDomain",
    "HybridSystemDef",
    "SolverConfig",
    "FlowSegment",
    "JumpRecord",
    "HybridArc",
    "rk4_step",
    "locate_event",
    "solve",
    "render_trajectory_csv",
]

# Probe re-integration inside locate_event substeps at this cap so that wide
# brackets (h >> typical solver steps) still localize events accurately.
_SUBSTEP_CAP = 0.01


class HybridError(Exception):
    """Base class for solver failures."""


class NonFiniteDynamics(HybridError):
    """The flow map returned a non-finite value.

    Carries the stage state at which the evaluation blew up.
    """

    def __init__(self, message: str, stage_state=None):
        super().__init__(message)
        self.stage_state = stage_state


class BracketError(HybridError):
    """locate_event was called without a bracketed sign change (caller bug)."""


class MaxJumpsExceeded(HybridError):
    """Jump count hit the safety cap: Zeno-like accumulation or a policy bug."""


class DeadState(HybridError):
    """Neither guard admits the state: it is outside both the flow and jump sets."""


@dataclass(frozen=True)
class HybridTime:
    """A point (t, j) of a hybrid time domain."""

    t: float
    j: int

    def __post_init__(self):
        if self.t < 0.0 or self.j < 0:
            raise ValueError(f"hybrid time must satisfy t >= 0, j >= 0; got {self}")


@dataclass(frozen=True)
class HybridTimeDomain:
    """Ordered intervals ([t_j, t_{j+1}], j); consecutive intervals share endpoints."""

    intervals: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        prev_end = None
        prev_j = None
        for t0, t1, j in self.intervals:
            if t1 < t0:
                raise ValueError(f"interval ({t0}, {t1}, {j}) has negative length")
            if prev_end is not None:
                if t0 != prev_end or j != prev_j + 1:
                    raise ValueError("intervals must be contiguous in t and j")
            prev_end, prev_j = t1, j

    @property
    def t_max(self) -> float:
        return self.intervals[-1][1]

    @property
    def j_max(self) -> int:
        return self.intervals[-1][2]


@dataclass(frozen=True)
class HybridSystemDef:
    """A hybrid system (flow map, jump map, guards) over q = (x, e, eta)."""

    flow_map: Callable[[np.ndarray], np.ndarray]
    jump_map: Callable[[np.ndarray], np.ndarray]
    flow_guard: Callable[[np.ndarray], float]
    jump_guard: Callable[[np.ndarray], float]
    state_dim: tuple[int, int, int]

    @property
    def n(self) -> int:
        return sum(self.state_dim)

    def split(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n_x, n_e, _ = self.state_dim
        return q[:n_x], q[n_x:n_x + n_e], q[n_x + n_e:]


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-step solver settings; defaults suit smooth low-dimensional loops."""

    h: float = 1e-3
    event_tol: float = 1e-9
    t_end: float = 20.0
    max_jumps: int = 100_000
    guard_tol: float = 1e-9

    def __post_init__(self):
        if not self.h > 0.0:
            raise ValueError("h must be positive")
        if not 0.0 < self.event_tol < self.h:
            raise ValueError("event_tol must satisfy 0 < event_tol < h")
        if not self.t_end > 0.0:
            raise ValueError("t_end must be positive")
        if self.max_jumps < 1:
            raise ValueError("max_jumps must be >= 1")


@dataclass(frozen=True)
class FlowSegment:
    """Samples of one flow interval: times (m,) and states (m, n), jump index j."""

    times: np.ndarray
    states: np.ndarray
    j: int


@dataclass(frozen=True)
class JumpRecord:
    t: float
    j: int
    q_before: np.ndarray
    q_after: np.ndarray


@dataclass(frozen=True)
class HybridArc:
    """A solved trajectory on its hybrid time domain."""

    domain: HybridTimeDomain
    segments: tuple[FlowSegment, ...]
    jumps: tuple[JumpRecord, ...]

    @property
    def executions(self) -> int:
        return len(self.jumps)

    @property
    def final_state(self) -> np.ndarray:
        return self.segments[-1].states[-1]

    @property
    def final_time(self) -> float:
        return float(self.segments[-1].times[-1])

    def jump_times(self) -> np.ndarray:
        return np.array([rec.t for rec in self.jumps])

    def min_dwell(self) -> float:
        """Smallest gap between consecutive jump times; inf with < 2 jumps."""
        if len(self.jumps) < 2:
            return math.inf
        times = self.jump_times()
        return float(np.min(np.diff(times)))


def _check_finite(k, stage_state):
    if not np.all(np.isfinite(k)):
        raise NonFiniteDynamics(
            f"flow map returned non-finite value at state {stage_state!r}",
            stage_state=stage_state,
        )


def rk4_step(flow_map, q, h):
    """One classical 4th-order Runge-Kutta step of size h from q.

    Works on plain floats and on numpy arrays alike; deterministic.
    """
    if not h > 0.0:
        raise ValueError("step size must be positive")
    k1 = flow_map(q)
    _check_finite(k1, q)
    q2 = q + 0.5 * h * k1
    k2 = flow_map(q2)
    _check_finite(k2, q2)
    q3 = q + 0.5 * h * k2
    k3 = flow_map(q3)
    _check_finite(k3, q3)
    q4 = q + h * k3
    k4 = flow_map(q4)
    _check_finite(k4, q4)
    return q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _flow_for(flow_map, q, tau):
    """Advance q by tau, substepping when tau exceeds the accuracy cap."""
    if tau <= 0.0:
        return q
    n_sub = max(1, math.ceil(tau / _SUBSTEP_CAP))
    step = tau / n_sub
    for _ in range(n_sub):
        q = rk4_step(flow_map, q, step)
    return q


def locate_event(flow_map, jump_guard, q_left, t_left, h, event_tol):
    """Bisect a bracketed jump-guard sign change to within event_tol seconds.

    Requires jump_guard(q_left) < 0 and jump_guard >= 0 at the state h ahead.
    Each probe re-integrates from q_left, so the returned state is consistent
    with the flow.  Returns (t_hit, q_hit) with jump_guard(q_hit) >= 0.
    """
    if jump_guard(q_left) >= 0.0:
        raise BracketError("guard is already nonnegative at the left end")
    q_right = _flow_for(flow_map, q_left, h)
    if jump_guard(q_right) < 0.0:
        raise BracketError("no guard sign change in the bracket")
    lo, hi = 0.0, h
    q_hi = q_right
    while hi - lo > event_tol:
        mid = 0.5 * (lo + hi)
        q_mid = _flow_for(flow_map, q_left, mid)
        if jump_guard(q_mid) >= 0.0:
            hi, q_hi = mid, q_mid
        else:
            lo = mid
    return t_left + hi, q_hi


def _as_state(q) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(q, dtype=float))
    if arr.ndim != 1:
        raise ValueError("state must be a scalar or a 1-d array")
    return arr


def _must_jump(sys: HybridSystemDef, q: np.ndarray, guard_tol: float) -> bool:
    # Strictly nonnegative guard jumps; a guard within tolerance of zero only
    # jumps if flowing is inadmissible, which avoids a jump-absorbing strip
    # around states where the guard rests at exactly zero.
    jg = sys.jump_guard(q)
    if jg >= 0.0:
        return True
    return jg >= -guard_tol and sys.flow_guard(q) > guard_tol


def solve(sys: HybridSystemDef, q0, cfg: SolverConfig) -> HybridArc:
    """Simulate the hybrid system from q0 until t_end or the jump cap.

    Jump-priority semantics: whenever the state is in both sets, it jumps.
    Consecutive jumps at one instant are allowed and each counts toward
    max_jumps.  Jump times are localized to within cfg.event_tol.
    """
    q = _as_state(q0).copy()
    if q.size != sys.n:
        raise ValueError(f"state has size {q.size}, system expects {sys.n}")
    if not (sys.flow_guard(q) <= cfg.guard_tol or sys.jump_guard(q) >= -cfg.guard_tol):
        raise DeadState("initial state is in neither the flow set nor the jump set")

    t = 0.0
    j = 0
    seg_t: list[float] = [t]
    seg_q: list[np.ndarray] = [q.copy()]
    segments: list[FlowSegment] = []
    jumps: list[JumpRecord] = []

    def close_segment():
        times = np.array(seg_t)
        states = np.array(seg_q)
        times.setflags(write=False)
        states.setflags(write=False)
        segments.append(FlowSegment(times=times, states=states, j=j))

    while True:
        while _must_jump(sys, q, cfg.guard_tol):
            if len(jumps) >= cfg.max_jumps:
                raise MaxJumpsExceeded(
                    f"reached {cfg.max_jumps} jumps at t = {t}; "
                    "Zeno-like accumulation or a policy bug"
                )
            q_after = _as_state(sys.jump_map(q))
            jumps.append(JumpRecord(t=t, j=j, q_before=q.copy(), q_after=q_after.copy()))
            close_segment()
            j += 1
            q = q_after.copy()
            seg_t = [t]
            seg_q = [q.copy()]
        if t >= cfg.t_end:
            break
        hs = min(cfg.h, cfg.t_end - t)
        q_trial = rk4_step(sys.flow_map, q, hs)
        if sys.jump_guard(q_trial) >= 0.0:
            t, q = locate_event(sys.flow_map, sys.jump_guard, q, t, hs, cfg.event_tol)
        else:
            if sys.flow_guard(q_trial) > cfg.guard_tol:
                raise DeadState(
                    f"state left the flow set without entering the jump set near t = {t + hs}"
                )
            t += hs
            q = q_trial
        seg_t.append(t)
        seg_q.append(q.copy())

    close_segment()
    domain = HybridTimeDomain(
        tuple((float(s.times[0]), float(s.times[-1]), s.j) for s in segments)
    )
    return HybridArc(domain=domain, segments=tuple(segments), jumps=tuple(jumps))


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _fmt_vec(vec: np.ndarray) -> str:
    if vec.size == 0:
        return ""
    return ";".join(_fmt(float(c)) for c in vec)


def render_trajectory_csv(
    arc: HybridArc,
    state_dim: tuple[int, int, int],
    value_fn: Callable[[np.ndarray], float] | None = None,
    composite_fn: Callable[[np.ndarray, np.ndarray, np.ndarray], float] | None = None,
    config_echo: Sequence[str] = (),
) -> str:
    """Render an arc as CSV with header ``t,j,phase,x,e,eta,V,R``.

    One row per integrator sample plus a jump_pre/jump_post pair per jump.
    Vector components join with ';'; floats carry 17 significant digits.
    value_fn maps the x-part to V; composite_fn maps (x, e, eta) to R;
    missing functions render as nan.
    """
    n_x, n_e, _ = state_dim

    def parts(q):
        return q[:n_x], q[n_x:n_x + n_e], q[n_x + n_e:]

    def row(t, j, phase, q):
        x, e, eta = parts(q)
        v = float(value_fn(x)) if value_fn is not None else math.nan
        r = float(composite_fn(x, e, eta)) if composite_fn is not None else math.nan
        return (
            f"{_fmt(t)},{j},{phase},{_fmt_vec(x)},{_fmt_vec(e)},{_fmt_vec(eta)},"
            f"{_fmt(v)},{_fmt(r)}"
        )

    lines = [f"# {entry}" for entry in config_echo]
    lines.append("t,j,phase,x,e,eta,V,R")
    for idx, seg in enumerate(arc.segments):
        for t, q in zip(seg.times, seg.states):
            lines.append(row(float(t), seg.j, "flow", q))
        if idx < len(arc.jumps):
            rec = arc.jumps[idx]
            lines.append(row(rec.t, rec.j, "jump_pre", rec.q_before))
            lines.append(row(rec.t, rec.j + 1, "jump_post", rec.q_after))
    return "\n".join(lines) + "\n"
