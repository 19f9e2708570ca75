"""Sampled-data closed loops: plant + controller + hold dynamics.

The loop state is x = (x_P, x_C) and the sampling-induced error is
e = (e_xP, e_u), where e_xP is the held-minus-current plant state and e_u
the held-minus-current input.  For a static controller under zero-order
hold the held input equals the controller output at the last transmission,
so e_u vanishes identically and e reduces to e_xP with ``de = -dx``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "DimensionError",
    "PlantModel",
    "Controller",
    "SampledLoop",
    "composed_flow",
    "example_vi_loop",
]


class DimensionError(ValueError):
    """State, error, or input dimensions are inconsistent with the loop."""


@dataclass(frozen=True)
class PlantModel:
    """Continuous-time plant dx_P/dt = f_p(x_P, u)."""

    n_p: int
    n_u: int
    f_p: Callable


@dataclass(frozen=True)
class Controller:
    """State feedback u = g_c(x_C, xhat_P), optionally dynamic via f_c.

    For dynamic controllers the held-input error dynamics need the partial
    derivatives of g_c; they are supplied explicitly (no autodiff).
    """

    n_c: int
    g_c: Callable
    f_c: Callable | None = None
    dgc_dxc: Callable | None = None
    dgc_dxhat: Callable | None = None

    @property
    def is_static(self) -> bool:
        return self.n_c == 0


@dataclass(frozen=True)
class SampledLoop:
    """A plant-controller loop closed over a sampled channel.

    ``hold`` is a pair (fhat_p, fhat_c) giving inter-sample dynamics of the
    held plant state and held input; None means zero-order hold (both zero).
    """

    plant: PlantModel
    controller: Controller
    hold: tuple[Callable, Callable] | None = None

    @property
    def is_zoh(self) -> bool:
        return self.hold is None

    @property
    def n_x(self) -> int:
        return self.plant.n_p + self.controller.n_c

    @property
    def n_e(self) -> int:
        # Static controller + ZOH: the held input is pinned to the held state,
        # so the input error is identically zero and is dropped from e.
        if self.controller.is_static and self.is_zoh:
            return self.plant.n_p
        return self.plant.n_p + self.plant.n_u

    def f(self, x: np.ndarray, e: np.ndarray) -> np.ndarray:
        return composed_flow(self, x, e)[0]

    def g(self, x: np.ndarray, e: np.ndarray) -> np.ndarray:
        return composed_flow(self, x, e)[1]

    def flow_grid(self, x_grid: np.ndarray, e_grid: np.ndarray):
        """Broadcast evaluation of (f, g) for scalar static-ZOH loops.

        Grid operations (certificate checks, Lipschitz scans) need f over
        meshes; this requires n_x = n_e = 1 with ufunc-compatible plant and
        controller functions.
        """
        if not (self.controller.is_static and self.is_zoh and self.plant.n_p == 1):
            raise DimensionError("grid evaluation supports scalar static ZOH loops only")
        xhat = x_grid + e_grid
        u = self.controller.g_c(xhat)
        fx = self.plant.f_p(x_grid, u)
        return fx, -fx


def composed_flow(loop: SampledLoop, x, e):
    """Closed-loop flow (dx, de) at (x, e), substituting the held signals.

    The held plant state is x_P + e_xP and the held input is the controller
    output plus e_u.  Under ZOH with a static controller de = -dx exactly.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    e = np.atleast_1d(np.asarray(e, dtype=float))
    n_p = loop.plant.n_p
    n_c = loop.controller.n_c
    if x.size != loop.n_x:
        raise DimensionError(f"x has size {x.size}, loop expects {loop.n_x}")
    if e.size != loop.n_e:
        raise DimensionError(f"e has size {e.size}, loop expects {loop.n_e}")

    x_p, x_c = x[:n_p], x[n_p:]
    e_xp = e[:n_p]
    xhat = x_p + e_xp

    if loop.controller.is_static:
        u_now = np.atleast_1d(np.asarray(loop.controller.g_c(xhat), dtype=float))
    else:
        u_now = np.atleast_1d(np.asarray(loop.controller.g_c(x_c, xhat), dtype=float))
    if u_now.size != loop.plant.n_u:
        raise DimensionError(f"controller output has size {u_now.size}, plant expects {loop.plant.n_u}")

    simple = loop.controller.is_static and loop.is_zoh
    e_u = e[n_p:] if not simple else np.zeros(0)
    uhat = u_now + e_u if e_u.size else u_now

    dx_p = np.atleast_1d(np.asarray(loop.plant.f_p(x_p, uhat), dtype=float))
    if dx_p.size != n_p:
        raise DimensionError("plant flow has the wrong dimension")
    if n_c:
        dx_c = np.atleast_1d(np.asarray(loop.controller.f_c(x_c, xhat), dtype=float))
    else:
        dx_c = np.zeros(0)
    dx = np.concatenate((dx_p, dx_c)) if n_c else dx_p

    if simple:
        return dx, -dx_p

    if loop.is_zoh:
        fhat_p = np.zeros(n_p)
        fhat_c = np.zeros(loop.plant.n_u)
    else:
        fp_fn, fc_fn = loop.hold
        fhat_p = np.atleast_1d(np.asarray(fp_fn(x_p, x_c, xhat, uhat), dtype=float))
        fhat_c = np.atleast_1d(np.asarray(fc_fn(x_p, x_c, xhat, uhat), dtype=float))
    de_xp = fhat_p - dx_p
    # d(uhat - u)/dt: the held input follows the hold dynamics while the live
    # controller output moves with x_C and the held plant state.
    ctrl = loop.controller
    if ctrl.dgc_dxhat is None or (n_c and ctrl.dgc_dxc is None):
        raise DimensionError(
            "dynamic or non-ZOH loops need the controller partials of g_c"
        )
    du = np.zeros(loop.plant.n_u)
    if n_c:
        du = du + np.asarray(ctrl.dgc_dxc(x_c, xhat), dtype=float) @ dx_c
    du = du + np.asarray(ctrl.dgc_dxhat(x_c, xhat), dtype=float) @ fhat_p
    de_u = fhat_c - du
    return dx, np.concatenate((de_xp, de_u))


def example_vi_loop(d: float) -> SampledLoop:
    """Scalar benchmark plant dx = d*x^2 - x^3 + u with static feedback u = -2x.

    d is an uncertain parameter, |d| < 1 in the model statement; values with
    |d| >= 1 are accepted with a warning so that inclusive endpoint draws of
    the benchmark pass through.
    """
    d = float(d)
    if not math.isfinite(d):
        raise ValueError("d must be finite")
    if abs(d) >= 1.0:
        warnings.warn(f"|d| = {abs(d)} >= 1 is outside the model's stated range", stacklevel=2)

    def f_p(x, u):
        return d * x * x - x * x * x + u

    def g_c(xhat):
        return -2.0 * xhat

    plant = PlantModel(n_p=1, n_u=1, f_p=f_p)
    controller = Controller(n_c=0, g_c=g_c)
    return SampledLoop(plant=plant, controller=controller, hold=None)
