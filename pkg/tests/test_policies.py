import math

import numpy as np
import pytest

from etcsim.certificates import PowerLaw, example_vi_certificate
from etcsim.hybrid import SolverConfig, solve
from etcsim.policies import (
    EtaPolicyParams,
    NonlinearAlphaError,
    WlPolicyParams,
    build_hybrid_system,
    eta_policy,
    initial_state,
    iss_policy,
    periodic_policy,
    wl_policy,
)
from etcsim.systems import example_vi_loop

CERT = example_vi_certificate(0.5)
GAMMA_T = 2.66 / (0.5 * 0.84)


def solve_policy(policy, d=0.5, x0=1.0, t_end=6.0, h=1e-3):
    loop = example_vi_loop(d)
    sys_ = build_hybrid_system(loop, policy)
    q0 = initial_state(loop, policy, x0)
    return sys_, solve(sys_, q0, SolverConfig(h=h, t_end=t_end))


class TestIssPolicy:
    def test_derived_gain_coefficient(self):
        gt = CERT.gamma_tilde()
        assert gt.coeff == pytest.approx(6.33333, abs=1e-5)
        assert gt.power == 2.0

    def test_guard_at_unit_state(self):
        pol = iss_policy(CERT)
        assert pol.flow_guard(np.array([1.0]), np.array([0.0]), np.zeros(0)) == -0.5

    def test_zero_error_flows(self):
        pol = iss_policy(CERT)
        for x in (0.3, -1.7, 2.5):
            assert pol.flow_guard(np.array([x]), np.array([0.0]), np.zeros(0)) < 0.0

    def test_boundary_point(self):
        pol = iss_policy(CERT)
        e_star = math.sqrt(0.5 / GAMMA_T)
        g = pol.jump_guard(np.array([1.0]), np.array([e_star]), np.zeros(0))
        assert g == pytest.approx(0.0, abs=1e-9)
        assert e_star == pytest.approx(0.280976, abs=1e-5)

    def test_v_decrease_along_arc(self):
        # V never increases, and between jumps it decays at the certified rate.
        pol = iss_policy(CERT)
        _, arc = solve_policy(pol, d=0.3, x0=0.9, t_end=4.0)
        assert arc.executions >= 2
        for seg in arc.segments:
            v = 0.5 * seg.states[:, 0] ** 2
            assert np.all(np.diff(v) <= 1e-6)
            if len(seg.times) > 2:
                dt = np.diff(seg.times)[:-1]
                slope = np.diff(v)[:-1] / dt
                assert np.all(slope <= -(1.0 - 0.5) * 0.84 * v[1:-1] + 1e-6)


class TestWlPolicy:
    def test_requires_linear_alpha(self):
        bad = example_vi_certificate(0.5)
        bad = type(bad)(
            V=bad.V, grad_V=bad.grad_V, alpha_v_lower=bad.alpha_v_lower,
            alpha_v_upper=bad.alpha_v_upper, alpha=PowerLaw(0.84, 2.0),
            gamma=bad.gamma, sigma=0.5,
        )
        with pytest.raises(NonlinearAlphaError):
            wl_policy(bad, WlPolicyParams(), example_vi_loop(0.5))

    def test_no_retrigger_after_jump(self):
        pol = wl_policy(CERT, WlPolicyParams(sigma_bar=1e-3), example_vi_loop(0.5))
        g = pol.jump_guard(np.array([1.0]), np.array([0.0]), np.array([1.0]))
        assert g < 0.0

    def test_floor_fires_regardless_of_state(self):
        p = WlPolicyParams(sigma_bar=1e-3, epsilon=1e-6)
        pol = wl_policy(CERT, p, example_vi_loop(0.5))
        g = pol.jump_guard(np.array([5.0]), np.array([3.0]), np.array([p.epsilon]))
        assert g >= 0.0

    def test_threshold_band_on_arc(self):
        p = WlPolicyParams(sigma_bar=1e-3, epsilon=1e-6)
        pol = wl_policy(CERT, p, example_vi_loop(0.5))
        _, arc = solve_policy(pol, d=0.5, x0=1.0, t_end=6.0)
        assert arc.executions >= 2
        for rec in arc.jumps:
            assert rec.q_after[2] == 1.0
        for k, seg in enumerate(arc.segments):
            eta = seg.states[:, 2]
            assert np.all(eta >= p.epsilon - 1e-12)
            assert np.all(eta <= 1.0 + 1e-12)
            # threshold inequality V(x) <= eta V(x+e) on the flow interior
            inner = seg.states[:-1] if k < len(arc.jumps) else seg.states
            v = 0.5 * inner[:, 0] ** 2
            vhat = 0.5 * (inner[:, 0] + inner[:, 1]) ** 2
            assert np.all(v <= inner[:, 2] * vhat + 1e-9)


class TestEtaPolicy:
    def test_zero_error_flows(self):
        pol = eta_policy(CERT, EtaPolicyParams(eta0=0.5))
        for x, eta in ((0.0, 0.1), (1.0, 0.0), (-2.0, 3.0)):
            g = pol.jump_guard(np.array([x]), np.array([0.0]), np.array([eta]))
            flows = pol.flow_guard(np.array([x]), np.array([0.0]), np.array([eta]))
            assert flows <= 0.0
            if max(0.5 * x * x, eta) > 0.0:
                assert g < 0.0

    def test_trigger_level_against_eta(self):
        pol = eta_policy(CERT, EtaPolicyParams(eta0=0.1))
        e_star = math.sqrt(0.1 / GAMMA_T)
        assert e_star == pytest.approx(0.125656, abs=1e-5)
        g = pol.jump_guard(np.array([0.0]), np.array([e_star]), np.array([0.1]))
        assert g == pytest.approx(0.0, abs=1e-9)

    def test_eta_decays_exponentially_when_coasting(self):
        # From the origin nothing triggers and eta follows d(eta)/dt = -0.5 eta.
        pol = eta_policy(CERT, EtaPolicyParams(delta=PowerLaw(0.5, 1.0), eta0=1.0))
        _, arc = solve_policy(pol, d=0.5, x0=0.0, t_end=1.0)
        assert arc.executions == 0
        eta_end = arc.final_state[2]
        assert eta_end == pytest.approx(math.exp(-0.5), abs=1e-9)

    def test_eta_stays_nonnegative_and_gain_bounded(self):
        pol = eta_policy(CERT, EtaPolicyParams(eta0=1.0))
        _, arc = solve_policy(pol, d=0.8, x0=-0.9, t_end=6.0)
        assert arc.executions >= 2
        for k, seg in enumerate(arc.segments):
            assert np.all(seg.states[:, 2] >= 0.0)
            inner = seg.states[:-1] if k < len(arc.jumps) else seg.states
            w = GAMMA_T * inner[:, 1] ** 2
            bound = np.maximum(0.5 * inner[:, 0] ** 2, inner[:, 2])
            assert np.all(w <= bound + 1e-9)

    def test_jump_resets_error_exactly(self):
        pol = eta_policy(CERT, EtaPolicyParams(eta0=0.1))
        _, arc = solve_policy(pol, d=0.5, x0=1.0, t_end=6.0)
        assert arc.executions >= 1
        for rec in arc.jumps:
            assert rec.q_after[1] == 0.0
            # eta resets to the pre-jump gain value
            w_pre = GAMMA_T * rec.q_before[1] ** 2
            assert rec.q_after[2] == pytest.approx(w_pre, rel=1e-12)


class TestPeriodicPolicy:
    def test_rejects_nonpositive_period(self):
        with pytest.raises(ValueError):
            periodic_policy(0.0)

    def test_execution_count(self):
        pol = periodic_policy(0.368)
        _, arc = solve_policy(pol, d=0.5, x0=0.5, t_end=20.0, h=1e-2)
        assert arc.executions == 54

    def test_long_period_never_fires(self):
        pol = periodic_policy(25.0)
        _, arc = solve_policy(pol, d=0.5, x0=0.5, t_end=20.0, h=1e-2)
        assert arc.executions == 0

    def test_clock_resets_and_spacing(self):
        pol = periodic_policy(0.25)
        _, arc = solve_policy(pol, d=0.2, x0=0.7, t_end=3.0, h=1e-3)
        assert arc.executions == 12
        for rec in arc.jumps:
            assert rec.q_after[2] == 0.0
        gaps = np.diff(arc.jump_times())
        assert np.all(np.abs(gaps - 0.25) <= 2e-9)

    def test_zeno_free_spacing(self):
        for pol in (
            iss_policy(CERT),
            wl_policy(CERT, WlPolicyParams(), example_vi_loop(0.5)),
            eta_policy(CERT, EtaPolicyParams(eta0=0.1)),
        ):
            _, arc = solve_policy(pol, d=0.5, x0=1.0, t_end=5.0)
            if arc.executions >= 2:
                assert arc.min_dwell() > 10 * 1e-9
