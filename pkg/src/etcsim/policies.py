"""Triggering policies: when a sampled loop must transmit.

Every policy is an instance of one guard/update contract over the augmented
state q = (x, e, eta): a flow guard (<= 0 admits flowing), a jump guard
(>= 0 fires a transmission), and flow/jump updates for the auxiliary
variable eta.  Guards for set unions and intersections compose with max and
min of the component guards, which keeps the sets closed and gives the
solver a single scalar sign test.

Four policies ship: a basic ISS trigger comparing the derived gain of the
error against V, a decreasing-threshold rule driving V(x) under a slowly
shrinking multiple of V at the last transmission, an auxiliary-threshold
rule that resets eta to the error gain at each transmission, and a periodic
baseline clocked by eta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .certificates import (
    CompositeLyapunov,
    IssCertificate,
    PowerLaw,
    eta_composite,
    iss_composite,
    wl_composite,
)
from .hybrid import HybridSystemDef
from .systems import SampledLoop, composed_flow

__all__ = [
    "NonlinearAlphaError",
    "IssPolicyParams",
    "WlPolicyParams",
    "EtaPolicyParams",
    "TriggerPolicy",
    "iss_policy",
    "wl_policy",
    "eta_policy",
    "periodic_policy",
    "build_hybrid_system",
    "initial_state",
]


class NonlinearAlphaError(ValueError):
    """The decreasing-threshold policy needs a linear decrease rate alpha."""


@dataclass(frozen=True)
class IssPolicyParams:
    sigma: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError("sigma must lie in (0, 1)")


@dataclass(frozen=True)
class WlPolicyParams:
    """Decreasing-threshold parameters: rate share sigma_bar, linear decay
    rate alpha_bar, and the floor epsilon that keeps the threshold positive."""

    sigma_bar: float = 1e-3
    alpha_bar: float = 0.84
    epsilon: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.sigma_bar < 1.0:
            raise ValueError("sigma_bar must lie in (0, 1)")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not self.alpha_bar > 0.0:
            raise ValueError("alpha_bar must be positive")


@dataclass(frozen=True)
class EtaPolicyParams:
    """Auxiliary-threshold parameters: decay delta of eta and its start value."""

    delta: PowerLaw = field(default_factory=lambda: PowerLaw(0.5, 1.0))
    eta0: float = 1.0
    w: Callable | None = None

    def __post_init__(self):
        if self.eta0 < 0.0:
            raise ValueError("eta0 must be nonnegative")


@dataclass(frozen=True)
class TriggerPolicy:
    """Guards and eta dynamics defining one triggering rule.

    Guards and updates take the split state (x, e, eta) as arrays.  The
    composite Lyapunov matching the policy (when one exists) and its linear
    envelope decay rate ride along for monitoring.
    """

    kind: str
    n_eta: int
    eta_init: np.ndarray
    flow_guard: Callable
    jump_guard: Callable
    eta_flow: Callable
    eta_jump: Callable
    params: object = None
    composite: CompositeLyapunov | None = None
    envelope_rate: float | None = None


def _norm(v: np.ndarray) -> float:
    return float(np.sqrt(np.sum(v * v)))


def iss_policy(cert: IssCertificate) -> TriggerPolicy:
    """Trigger as soon as the derived error gain reaches V(x).

    Flow while gamma_tilde(|e|) <= V(x); one scalar guard serves both sets,
    so their union covers the whole (x, e) space.  No auxiliary variable.
    """
    gt = cert.gamma_tilde()

    def guard(x, e, eta):
        return float(gt(_norm(e))) - float(cert.V(x))

    def eta_flow(x, e, eta):
        return np.zeros(0)

    rate = None
    if cert.alpha.is_linear:
        rate = (1.0 - cert.sigma) * cert.alpha.coeff
    return TriggerPolicy(
        kind="iss",
        n_eta=0,
        eta_init=np.zeros(0),
        flow_guard=guard,
        jump_guard=guard,
        eta_flow=eta_flow,
        eta_jump=eta_flow,
        params=IssPolicyParams(sigma=cert.sigma),
        composite=None,
        envelope_rate=rate,
    )


def wl_policy(cert: IssCertificate, p: WlPolicyParams, loop: SampledLoop) -> TriggerPolicy:
    """Trigger when V(x) meets the shrinking threshold eta * V(x + e).

    eta decays at the constant rate sigma_bar * alpha_bar along flows and
    resets to 1 at each transmission, so the threshold replays the last
    transmitted level.  The jump set adds the condition that V has stopped
    decreasing fast enough (grad_V . f >= -sigma_bar*alpha_bar*V), which
    rules out an immediate re-trigger after a transmission, plus the floor
    eta = epsilon.  The loop is needed because that condition evaluates the
    closed-loop flow.
    """
    if not cert.alpha.is_linear:
        raise NonlinearAlphaError("the decreasing-threshold policy requires alpha(s) = c*s")
    sb_ab = p.sigma_bar * p.alpha_bar

    def jump_guard(x, e, eta):
        vx = float(cert.V(x))
        vxe = float(cert.V(x + e))
        near = vx - float(eta[0]) * vxe
        fx, _ = composed_flow(loop, x, e)
        stalled = float(np.dot(cert.grad(x), fx)) + sb_ab * vx
        return max(min(near, stalled), p.epsilon - float(eta[0]))

    def flow_guard(x, e, eta):
        vx = float(cert.V(x))
        vxe = float(cert.V(x + e))
        et = float(eta[0])
        return max(vx - et * vxe, et - 1.0, p.epsilon - et)

    def eta_flow(x, e, eta):
        return np.array([-sb_ab])

    def eta_jump(x, e, eta):
        return np.array([1.0])

    return TriggerPolicy(
        kind="wl",
        n_eta=1,
        eta_init=np.array([1.0]),
        flow_guard=flow_guard,
        jump_guard=jump_guard,
        eta_flow=eta_flow,
        eta_jump=eta_jump,
        params=p,
        composite=wl_composite(cert, loop.n_x, loop.n_e),
        envelope_rate=sb_ab,
    )


def eta_policy(cert: IssCertificate, p: EtaPolicyParams,
               n_x: int = 1, n_e: int = 1) -> TriggerPolicy:
    """Trigger when the error gain W(e) reaches max{eta, V(x)}.

    eta decays as d(eta)/dt = -delta(eta) along flows and resets to the
    pre-jump gain W(e) at transmissions, so the threshold is replayed at the
    level that fired.  W defaults to the certificate's derived gain.
    """
    gt = cert.gamma_tilde()
    w_fn = p.w if p.w is not None else (lambda e: float(gt(_norm(np.atleast_1d(e)))))

    def jump_guard(x, e, eta):
        w = float(w_fn(e))
        m = max(float(cert.V(x)), float(eta[0]))
        return min(w - m, float(eta[0]))

    def flow_guard(x, e, eta):
        w = float(w_fn(e))
        m = max(float(cert.V(x)), float(eta[0]))
        return max(w - m, -float(eta[0]))

    def eta_flow(x, e, eta):
        return np.array([-float(p.delta(float(eta[0])))])

    def eta_jump(x, e, eta):
        return np.array([float(w_fn(e))])

    rate = None
    if cert.alpha.is_linear and isinstance(p.delta, PowerLaw) and p.delta.is_linear:
        rate = min((1.0 - cert.sigma) * cert.alpha.coeff, p.delta.coeff)
    return TriggerPolicy(
        kind="eta_threshold",
        n_eta=1,
        eta_init=np.array([float(p.eta0)]),
        flow_guard=flow_guard,
        jump_guard=jump_guard,
        eta_flow=eta_flow,
        eta_jump=eta_jump,
        params=p,
        composite=eta_composite(cert, n_x, n_e),
        envelope_rate=rate,
    )


def periodic_policy(period: float) -> TriggerPolicy:
    """Transmit every ``period`` seconds; eta is the clock since the last one."""
    if not period > 0.0:
        raise ValueError("period must be positive")

    def guard(x, e, eta):
        return float(eta[0]) - period

    def eta_flow(x, e, eta):
        return np.array([1.0])

    def eta_jump(x, e, eta):
        return np.array([0.0])

    return TriggerPolicy(
        kind="periodic",
        n_eta=1,
        eta_init=np.array([0.0]),
        flow_guard=guard,
        jump_guard=guard,
        eta_flow=eta_flow,
        eta_jump=eta_jump,
        params=period,
        composite=None,
        envelope_rate=None,
    )


def build_hybrid_system(loop: SampledLoop, policy: TriggerPolicy) -> HybridSystemDef:
    """Assemble the closed-loop hybrid system for a loop under a policy.

    Flows stack the loop's composed flow with the policy's eta dynamics;
    jumps keep x, zero the error exactly, and apply the policy's eta update.
    """
    n_x, n_e, n_eta = loop.n_x, loop.n_e, policy.n_eta

    def split(q):
        return q[:n_x], q[n_x:n_x + n_e], q[n_x + n_e:]

    def flow_map(q):
        x, e, eta = split(q)
        dx, de = composed_flow(loop, x, e)
        return np.concatenate((dx, de, policy.eta_flow(x, e, eta)))

    def jump_map(q):
        x, e, eta = split(q)
        return np.concatenate((x, np.zeros(n_e), policy.eta_jump(x, e, eta)))

    def flow_guard(q):
        x, e, eta = split(q)
        return policy.flow_guard(x, e, eta)

    def jump_guard(q):
        x, e, eta = split(q)
        return policy.jump_guard(x, e, eta)

    return HybridSystemDef(
        flow_map=flow_map,
        jump_map=jump_map,
        flow_guard=flow_guard,
        jump_guard=jump_guard,
        state_dim=(n_x, n_e, n_eta),
    )


def initial_state(loop: SampledLoop, policy: TriggerPolicy, x0) -> np.ndarray:
    """Fresh-transmission initial condition: given x, zero error, policy eta."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.size != loop.n_x:
        raise ValueError(f"x0 has size {x0.size}, loop expects {loop.n_x}")
    return np.concatenate((x0, np.zeros(loop.n_e), policy.eta_init))
