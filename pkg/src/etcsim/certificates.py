"""Lyapunov certificates and the numeric checks built on them.

An ISS certificate packages a Lyapunov function V with comparison functions
bounding it and its decrease under the sampling-induced error.  Composite
Lyapunov functions are pointwise maxima of smooth branches; their decrease
along arcs is monitored numerically, and their Clarke directional derivative
is the maximum of the active branch derivatives.

Comparison functions are represented as power laws c * s**p, which are exact
under inversion and composition; that covers every certificate this package
ships while keeping derived gains closed-form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .systems import SampledLoop

__all__ = [
    "CertificateError",
    "UnboundedRatio",
    "DivergentIntegral",
    "PowerLaw",
    "IssCertificate",
    "example_vi_certificate",
    "Box",
    "LyapunovBranch",
    "CompositeLyapunov",
    "LipschitzEstimates",
    "DwellTimeBound",
    "DecreaseReport",
    "verify_iss",
    "iss_violation_grid",
    "clarke_dd",
    "monitor_decrease",
    "estimate_lipschitz",
    "dwell_lower_bound",
    "dwell_time_bound",
    "wl_dwell_rate",
    "eta_dwell_rate",
]

_RATIO_CAP = 1e12


class CertificateError(Exception):
    """Base class for certificate-layer failures."""


class UnboundedRatio(CertificateError):
    """A Lipschitz-style ratio exceeded the cap: the bound form does not hold."""


class DivergentIntegral(CertificateError):
    """The comparison rate is nonpositive somewhere, so the dwell integral diverges."""


@dataclass(frozen=True)
class PowerLaw:
    """Class-K-infinity comparison function k(s) = coeff * s**power.

    coeff > 0 and power > 0 keep it zero at zero, strictly increasing and
    unbounded.  Inversion and composition stay inside the family, so derived
    gains are exact rather than numerically inverted.
    """

    coeff: float
    power: float = 1.0

    def __post_init__(self):
        if not (self.coeff > 0.0 and self.power > 0.0):
            raise ValueError("power law needs coeff > 0 and power > 0")

    def __call__(self, s):
        if self.power == 1.0:
            return self.coeff * s
        if self.power == 2.0:
            return self.coeff * s * s
        return self.coeff * np.power(s, self.power)

    def inverse(self) -> "PowerLaw":
        return PowerLaw(self.coeff ** (-1.0 / self.power), 1.0 / self.power)

    def compose(self, inner: "PowerLaw") -> "PowerLaw":
        return PowerLaw(self.coeff * inner.coeff ** self.power, self.power * inner.power)

    def scale(self, c: float) -> "PowerLaw":
        return PowerLaw(c * self.coeff, self.power)

    def deriv(self, s: float) -> float:
        if self.power == 1.0:
            return self.coeff
        return self.coeff * self.power * float(s) ** (self.power - 1.0)

    @property
    def is_linear(self) -> bool:
        return self.power == 1.0


@dataclass(frozen=True)
class IssCertificate:
    """Lyapunov data for a loop that is ISS with respect to the sampling error.

    V and grad_V follow the convention V: (..., n_x) -> (...,) so that both
    point evaluation and grid evaluation broadcast.  alpha_v_lower/upper
    bound V in terms of |x|; alpha and gamma bound the decrease:
    grad_V . f <= -alpha(V) + gamma(|e|).  sigma in (0, 1) is the share of
    the decrease the trigger may consume.
    """

    V: Callable
    alpha_v_lower: PowerLaw
    alpha_v_upper: PowerLaw
    alpha: PowerLaw
    gamma: PowerLaw
    sigma: float = 0.5
    grad_V: Callable | None = None

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError("sigma must lie in (0, 1)")

    def gamma_tilde(self) -> PowerLaw:
        """Derived trigger gain: alpha^{-1}(gamma(s) / sigma)."""
        return self.alpha.inverse().compose(self.gamma.scale(1.0 / self.sigma))

    def grad(self, x: np.ndarray) -> np.ndarray:
        """Gradient of V, analytic when supplied, else central differences."""
        if self.grad_V is not None:
            return np.asarray(self.grad_V(x), dtype=float)
        x = np.asarray(x, dtype=float)
        step = 1e-6
        out = np.empty_like(x)
        for i in range(x.size):
            hi = x.copy()
            lo = x.copy()
            hi[i] += step
            lo[i] -= step
            out[i] = (self.V(hi) - self.V(lo)) / (2.0 * step)
        return out

    def scaled(self, c: float) -> "IssCertificate":
        """The certificate with V and gamma multiplied by c > 0 (alpha linear)."""
        if not c > 0.0:
            raise ValueError("scale factor must be positive")
        if not self.alpha.is_linear:
            raise ValueError("scaling preserves the certificate only for linear alpha")
        base_v, base_grad = self.V, self.grad_V
        return IssCertificate(
            V=lambda x: c * base_v(x),
            alpha_v_lower=self.alpha_v_lower.scale(c),
            alpha_v_upper=self.alpha_v_upper.scale(c),
            alpha=self.alpha,
            gamma=self.gamma.scale(c),
            sigma=self.sigma,
            grad_V=None if base_grad is None else (lambda x: c * np.asarray(base_grad(x))),
        )


def example_vi_certificate(sigma: float = 0.5) -> IssCertificate:
    """Certificate for the scalar benchmark loop: V = x^2/2.

    The decrease bound holds with alpha(s) = 0.84 s and gamma(s) = 2.66 s^2
    for the closed loop under any parameter d in [0, 1]; verify_iss checks
    this numerically on a grid.
    """
    return IssCertificate(
        V=lambda x: 0.5 * np.sum(np.asarray(x, dtype=float) ** 2, axis=-1),
        grad_V=lambda x: np.asarray(x, dtype=float),
        alpha_v_lower=PowerLaw(0.5, 2.0),
        alpha_v_upper=PowerLaw(0.5, 2.0),
        alpha=PowerLaw(0.84, 1.0),
        gamma=PowerLaw(2.66, 2.0),
        sigma=sigma,
    )


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in the scalar (x, e) plane."""

    x_min: float
    x_max: float
    e_min: float
    e_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.e_max > self.e_min):
            raise ValueError("box must have positive extent")


def _norm_last(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.asarray(v, dtype=float) ** 2, axis=-1))


@dataclass(frozen=True)
class LyapunovBranch:
    """One smooth branch of a composite Lyapunov function.

    ``value`` broadcasts over leading axes of (x, e, eta); ``ddt`` is the
    along-flow derivative of the branch at a single point, given the flow
    direction (dx, de, deta).
    """

    name: str
    value: Callable
    ddt: Callable


@dataclass(frozen=True)
class CompositeLyapunov:
    """Pointwise maximum of smooth Lyapunov branches over q = (x, e, eta)."""

    variant: str
    branches: tuple[LyapunovBranch, ...]
    state_dim: tuple[int, int, int]

    def split(self, q: np.ndarray):
        n_x, n_e, _ = self.state_dim
        q = np.asarray(q, dtype=float)
        return q[..., :n_x], q[..., n_x:n_x + n_e], q[..., n_x + n_e:]

    def value(self, x, e, eta):
        vals = [b.value(x, e, eta) for b in self.branches]
        out = vals[0]
        for v in vals[1:]:
            out = np.maximum(out, v)
        return out

    def value_q(self, q) -> float:
        x, e, eta = self.split(q)
        return float(self.value(x, e, eta))


def iss_composite(cert: IssCertificate, n_x: int, n_e: int) -> CompositeLyapunov:
    """max{V(x), gamma_tilde(|e|)} for the basic ISS trigger (no eta)."""
    gt = cert.gamma_tilde()

    def gain_value(x, e, eta):
        return gt(_norm_last(e))

    def gain_ddt(x, e, eta, dx, de, deta):
        r = float(_norm_last(e))
        if r == 0.0:
            return 0.0
        return gt.deriv(r) * float(np.dot(e, de)) / r

    branches = (
        LyapunovBranch(
            "V",
            lambda x, e, eta: cert.V(x),
            lambda x, e, eta, dx, de, deta: float(np.dot(cert.grad(x), dx)),
        ),
        LyapunovBranch("gain", gain_value, gain_ddt),
    )
    return CompositeLyapunov("iss_max", branches, (n_x, n_e, 0))


def wl_composite(cert: IssCertificate, n_x: int, n_e: int) -> CompositeLyapunov:
    """max{V(x), eta * V(x + e)} for the decreasing-threshold trigger."""

    def thresh_value(x, e, eta):
        return eta[..., 0] * cert.V(x + e)

    def thresh_ddt(x, e, eta, dx, de, deta):
        xe = x + e
        return float(deta[0]) * float(cert.V(xe)) + float(eta[0]) * float(
            np.dot(cert.grad(xe), dx + de)
        )

    branches = (
        LyapunovBranch(
            "V",
            lambda x, e, eta: cert.V(x),
            lambda x, e, eta, dx, de, deta: float(np.dot(cert.grad(x), dx)),
        ),
        LyapunovBranch("threshold", thresh_value, thresh_ddt),
    )
    return CompositeLyapunov("wl_max", branches, (n_x, n_e, 1))


def eta_composite(cert: IssCertificate, n_x: int, n_e: int) -> CompositeLyapunov:
    """max{V(x), W(e), eta} for the auxiliary-threshold trigger."""
    gt = cert.gamma_tilde()

    def w_value(x, e, eta):
        return gt(_norm_last(e))

    def w_ddt(x, e, eta, dx, de, deta):
        r = float(_norm_last(e))
        if r == 0.0:
            return 0.0
        return gt.deriv(r) * float(np.dot(e, de)) / r

    branches = (
        LyapunovBranch(
            "V",
            lambda x, e, eta: cert.V(x),
            lambda x, e, eta, dx, de, deta: float(np.dot(cert.grad(x), dx)),
        ),
        LyapunovBranch("W", w_value, w_ddt),
        LyapunovBranch(
            "eta",
            lambda x, e, eta: eta[..., 0],
            lambda x, e, eta, dx, de, deta: float(deta[0]),
        ),
    )
    return CompositeLyapunov("eta_max", branches, (n_x, n_e, 1))


def clarke_dd(R: CompositeLyapunov, q, v, act_tol: float = 1e-9) -> float:
    """Clarke directional derivative of R at q along the flow direction v.

    For a pointwise max of smooth branches this is the maximum of the branch
    derivatives over the active branches; a branch is active when its value
    lies within act_tol * |R(q)| of the maximum.
    """
    x, e, eta = R.split(np.asarray(q, dtype=float))
    dx, de, deta = R.split(np.asarray(v, dtype=float))
    vals = [float(b.value(x, e, eta)) for b in R.branches]
    top = max(vals)
    cutoff = top - act_tol * abs(top)
    derivs = [
        b.ddt(x, e, eta, dx, de, deta)
        for b, val in zip(R.branches, vals)
        if val >= cutoff
    ]
    return max(derivs)


@dataclass(frozen=True)
class DecreaseReport:
    """Worst-case decrease violations of a composite Lyapunov along one arc."""

    max_flow_violation: float
    max_jump_increment: float
    max_value: float
    worst_flow_time: float | None
    worst_jump_time: float | None
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_flow_violation <= self.tol and self.max_jump_increment <= self.tol


def monitor_decrease(R: CompositeLyapunov, arc, alpha_r: Callable, tol: float,
                     min_dt: float = 1e-8) -> DecreaseReport:
    """Check R's flow decrease and jump non-increase along a solved arc.

    Flow check: for consecutive samples the finite-difference slope of R must
    not exceed -alpha_r(R) evaluated at the right sample (R is nonincreasing,
    so the right value gives the weakest admissible rate).  Two sample pairs
    are excluded: pairs narrower than min_dt, where localization noise
    dominates the quotient, and the pair ending at a jump, whose right
    endpoint sits inside the jump set (past the guard crossing by up to the
    event tolerance) where the flow-decrease condition does not apply.  Jump
    check: R after each jump must not exceed R before it.
    """
    max_flow = -math.inf
    worst_flow_t = None
    max_jump = -math.inf
    worst_jump_t = None
    max_value = -math.inf
    n_x, n_e, _ = R.state_dim
    for seg_index, seg in enumerate(arc.segments):
        x = seg.states[:, :n_x]
        e = seg.states[:, n_x:n_x + n_e]
        eta = seg.states[:, n_x + n_e:]
        values = np.asarray(R.value(x, e, eta), dtype=float)
        max_value = max(max_value, float(values.max()))
        if values.size < 2:
            continue
        dt = np.diff(seg.times)
        keep = dt > min_dt
        if seg_index < len(arc.jumps):
            keep[-1] = False
        if not np.any(keep):
            continue
        slope = np.diff(values)[keep] / dt[keep]
        viol = slope + np.asarray(alpha_r(values[1:][keep]), dtype=float)
        idx = int(np.argmax(viol))
        if viol[idx] > max_flow:
            max_flow = float(viol[idx])
            worst_flow_t = float(seg.times[1:][keep][idx])
    for rec in arc.jumps:
        inc = R.value_q(rec.q_after) - R.value_q(rec.q_before)
        max_value = max(max_value, R.value_q(rec.q_after))
        if inc > max_jump:
            max_jump = float(inc)
            worst_jump_t = rec.t
    return DecreaseReport(
        max_flow_violation=max_flow,
        max_jump_increment=max_jump,
        max_value=max_value,
        worst_flow_time=worst_flow_t,
        worst_jump_time=worst_jump_t,
        tol=tol,
    )


def _d_values(d_range, count: int) -> np.ndarray:
    lo, hi = float(d_range[0]), float(d_range[1])
    if count < 2 or hi == lo:
        return np.array([lo])
    return np.linspace(lo, hi, count)


def iss_violation_grid(
    cert: IssCertificate,
    loop,
    region: Box,
    d_range=(0.0, 1.0),
    grid_n: int = 201,
    d_grid_n: int = 11,
):
    """Max of grad_V . f + alpha(V) - gamma(|e|) over an (x, e, d) grid.

    Returns (max_violation, (x, e, d) at the maximum).  Nonpositive means the
    certificate's decrease bound holds everywhere on the grid.  ``loop`` is a
    SampledLoop or a callable d -> SampledLoop for parameterized plants.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    xs = np.linspace(region.x_min, region.x_max, grid_n)
    es = np.linspace(region.e_min, region.e_max, grid_n)
    X, E = np.meshgrid(xs, es, indexing="ij")
    if callable(loop) and not isinstance(loop, SampledLoop):
        ds = _d_values(d_range, d_grid_n)
        loops = [(float(d), loop(float(d))) for d in ds]
    else:
        loops = [(math.nan, loop)]
    best = -math.inf
    where = (math.nan, math.nan, math.nan)
    v_grid = cert.V(X[..., None])
    if cert.grad_V is not None:
        gv_grid = cert.grad_V(X[..., None])[..., 0]
    else:
        step = 1e-6
        gv_grid = (cert.V((X + step)[..., None]) - cert.V((X - step)[..., None])) / (2.0 * step)
    decrease = cert.alpha(v_grid) - cert.gamma(np.abs(E))
    for d, lp in loops:
        fx, _ = lp.flow_grid(X, E)
        expr = gv_grid * fx + decrease
        expr = np.where(np.isfinite(expr), expr, math.inf)
        idx = np.unravel_index(int(np.argmax(expr)), expr.shape)
        val = float(expr[idx])
        if val > best:
            best = val
            where = (float(X[idx]), float(E[idx]), d)
    return best, where


def verify_iss(cert, loop, region: Box, d_range=(0.0, 1.0), grid_n: int = 201,
               d_grid_n: int = 11) -> float:
    """Grid check of the certificate's decrease bound; <= 0 means it passes."""
    best, _ = iss_violation_grid(cert, loop, region, d_range, grid_n, d_grid_n)
    return best


@dataclass(frozen=True)
class LipschitzEstimates:
    """Grid maxima of the linear-growth ratios; lower bounds of the true constants."""

    l1: float
    l2: float
    l3: float
    region: Box
    grid_n: int

    def inflated(self, factor: float = 1.1) -> "LipschitzEstimates":
        return LipschitzEstimates(
            self.l1 * factor, self.l2 * factor, self.l3 * factor, self.region, self.grid_n
        )


def estimate_lipschitz(loop: SampledLoop, cert: IssCertificate, region: Box,
                       grid_n: int = 201) -> LipschitzEstimates:
    """Estimate the growth constants of the loop on a box by grid maximization.

    l1 bounds |f| / (|x| + |e|), l3 bounds |g| / (|x| + |e|), and l2 bounds
    alpha_v_lower^{-1}(gamma_tilde(|e|)) / |e|; the origin is excluded from
    the ratios.  Grid maxima under-estimate the true suprema, so dwell bounds
    derived from them should use the inflated variant.
    """
    xs = np.linspace(region.x_min, region.x_max, grid_n)
    es = np.linspace(region.e_min, region.e_max, grid_n)
    X, E = np.meshgrid(xs, es, indexing="ij")
    fx, gx = loop.flow_grid(X, E)
    denom = np.abs(X) + np.abs(E)
    mask = denom > 0.0
    r1 = np.abs(fx)[mask] / denom[mask]
    r3 = np.abs(gx)[mask] / denom[mask]
    l1 = float(r1.max())
    l3 = float(r3.max())
    gain = cert.alpha_v_lower.inverse().compose(cert.gamma_tilde())
    e_abs = np.abs(es[es != 0.0])
    if e_abs.size == 0:
        e_abs = np.array([max(abs(region.e_min), abs(region.e_max))])
    r2 = gain(e_abs) / e_abs
    l2 = float(r2.max())
    for name, val in (("l1", l1), ("l2", l2), ("l3", l3)):
        if not math.isfinite(val) or val > _RATIO_CAP:
            raise UnboundedRatio(f"{name} ratio exceeds {_RATIO_CAP:g}; bound form fails")
    return LipschitzEstimates(l1=l1, l2=l2, l3=l3, region=region, grid_n=grid_n)


def _adaptive_simpson(f, a, b, rel_tol):
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    budget = rel_tol * max(abs(whole), 1e-300)

    def recurse(a, b, fa, fm, fb, whole, eps, depth):
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole
        if depth >= 48 or abs(err) <= 15.0 * eps:
            return left + right + err / 15.0
        return recurse(a, m, fa, flm, fm, left, 0.5 * eps, depth + 1) + recurse(
            m, b, fm, frm, fb, right, 0.5 * eps, depth + 1
        )

    return recurse(a, b, fa, fm, fb, whole, budget, 0)


def dwell_lower_bound(rate_fn: Callable, a: float, b: float,
                      rel_tol: float = 1e-9) -> float:
    """Time for a comparison state to grow from a to b under ds/dt = rate(s).

    Computed as the integral of 1/rate over [a, b] by adaptive Simpson
    quadrature with interval bisection.  A nonpositive rate anywhere on the
    interval means the integral diverges (the bound is infinite) and raises
    DivergentIntegral.
    """
    if not (b > a >= 0.0):
        raise ValueError("need b > a >= 0")
    for s in np.linspace(a, b, 1001):
        if not rate_fn(float(s)) > 0.0:
            raise DivergentIntegral(f"rate is nonpositive at s = {float(s)}; bound is infinite")

    def integrand(s):
        v = rate_fn(s)
        if not v > 0.0:
            raise DivergentIntegral(f"rate is nonpositive at s = {s}; bound is infinite")
        return 1.0 / v

    return _adaptive_simpson(integrand, float(a), float(b), rel_tol)


@dataclass(frozen=True)
class DwellTimeBound:
    """A computed lower bound on the time between consecutive jumps."""

    a: float
    b: float
    rate: Callable
    tau: float


def dwell_time_bound(rate_fn: Callable, a: float, b: float) -> DwellTimeBound:
    return DwellTimeBound(a=a, b=b, rate=rate_fn, tau=dwell_lower_bound(rate_fn, a, b))


def wl_dwell_rate(L: LipschitzEstimates, sigma_bar: float, alpha_bar: float,
                  epsilon: float) -> Callable:
    """Comparison rate for the decreasing-threshold policy's dwell bound.

    The state-ratio branch grows no faster than l1*l2*(1 + s/l2)**2 and the
    threshold-clock branch no faster than sigma_bar*alpha_bar/(1 - epsilon);
    the dwell bound integrates 1/rate from 0 to 1.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    clock = sigma_bar * alpha_bar / (1.0 - epsilon)

    def rate(s):
        grow = 1.0 + s / L.l2
        return max(L.l1 * L.l2 * grow * grow, clock)

    return rate


def eta_dwell_rate(L: LipschitzEstimates) -> Callable:
    """Comparison rate for the auxiliary-threshold policy's dwell bound.

    The error-to-state ratio grows no faster than l3 + (l1 + l3)s + l1 s^2;
    the dwell bound integrates 1/rate from 0 to 1/l2.
    """

    def rate(s):
        return L.l3 + (L.l1 + L.l3) * s + L.l1 * s * s

    return rate
