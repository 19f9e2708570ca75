import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from etcsim.certificates import (
    Box,
    DivergentIntegral,
    IssCertificate,
    PowerLaw,
    UnboundedRatio,
    clarke_dd,
    dwell_lower_bound,
    estimate_lipschitz,
    eta_composite,
    eta_dwell_rate,
    example_vi_certificate,
    iss_composite,
    monitor_decrease,
    verify_iss,
    wl_composite,
    wl_dwell_rate,
)
from etcsim.hybrid import SolverConfig, solve
from etcsim.policies import (
    EtaPolicyParams,
    WlPolicyParams,
    build_hybrid_system,
    eta_policy,
    initial_state,
    iss_policy,
    wl_policy,
)
from etcsim.systems import example_vi_loop

REGION = Box(-2.0, 2.0, -2.0, 2.0)


def solve_policy(policy, d=0.5, x0=1.0, t_end=5.0):
    loop = example_vi_loop(d)
    sys_ = build_hybrid_system(loop, policy)
    q0 = initial_state(loop, policy, x0)
    return solve(sys_, q0, SolverConfig(t_end=t_end))


class TestPowerLaw:
    @given(st.floats(min_value=1e-3, max_value=1e3))
    def test_inverse_roundtrip(self, s):
        k = PowerLaw(2.5, 2.0)
        assert k.inverse()(k(s)) == pytest.approx(s, rel=1e-12)

    def test_compose(self):
        outer = PowerLaw(2.0, 2.0)
        inner = PowerLaw(3.0, 1.0)
        assert outer.compose(inner)(1.5) == pytest.approx(2.0 * (3.0 * 1.5) ** 2)

    def test_linear_flag(self):
        assert PowerLaw(0.84, 1.0).is_linear
        assert not PowerLaw(2.66, 2.0).is_linear

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            PowerLaw(0.0, 1.0)
        with pytest.raises(ValueError):
            PowerLaw(1.0, -1.0)


class TestVerifyIss:
    def test_example_certificate_passes(self, cert05):
        worst = verify_iss(cert05, example_vi_loop, REGION, (0.0, 1.0), 201, 11)
        assert worst <= 1e-12

    def test_broken_certificate_fails(self, cert05):
        broken = IssCertificate(
            V=cert05.V, grad_V=cert05.grad_V,
            alpha_v_lower=cert05.alpha_v_lower, alpha_v_upper=cert05.alpha_v_upper,
            alpha=PowerLaw(10.0, 1.0), gamma=cert05.gamma, sigma=0.5,
        )
        worst = verify_iss(broken, example_vi_loop, REGION, (0.0, 1.0), 201, 11)
        assert worst >= 1.0

    def test_zero_dynamics_has_no_decrease(self, cert05):
        from etcsim.systems import Controller, PlantModel, SampledLoop

        frozen = SampledLoop(
            plant=PlantModel(n_p=1, n_u=1, f_p=lambda x, u: 0.0 * x),
            controller=Controller(n_c=0, g_c=lambda xhat: 0.0 * xhat),
        )
        worst = verify_iss(cert05, frozen, REGION, (0.0, 0.0), 101, 1)
        assert worst > 0.0

    def test_rejects_tiny_grid(self, cert05):
        with pytest.raises(ValueError):
            verify_iss(cert05, example_vi_loop, REGION, (0.0, 1.0), 1, 3)


class TestClarkeDd:
    def test_single_branch_is_analytic(self, cert05):
        R = iss_composite(cert05, 1, 1)
        loop = example_vi_loop(0.5)
        q = np.array([1.0, 0.1])
        dx, de = (loop.f([1.0], [0.1]), loop.g([1.0], [0.1]))
        v = np.concatenate((dx, de))
        assert clarke_dd(R, q, v) == pytest.approx(1.0 * dx[0], rel=1e-12)

    def test_threshold_tie_picks_threshold_rate(self, cert05):
        # Fresh transmission: both branches tie; the active max is the
        # threshold branch decaying at sigma_bar*alpha_bar*V(x+e).
        R = wl_composite(cert05, 1, 1)
        loop = example_vi_loop(0.5)
        sb, ab = 1e-3, 0.84
        q = np.array([1.0, 0.0, 1.0])
        dx, de = (loop.f([1.0], [0.0]), loop.g([1.0], [0.0]))
        v = np.concatenate((dx, de, [-sb * ab]))
        out = clarke_dd(R, q, v)
        assert out == pytest.approx(-sb * ab * 0.5, rel=1e-12)

    def test_eta_branch_dominates(self, cert05):
        R = eta_composite(cert05, 1, 1)
        q = np.array([0.1, 0.0, 5.0])
        v = np.array([-0.2, 0.2, -0.5 * 5.0])
        assert clarke_dd(R, q, v) == pytest.approx(-2.5, rel=1e-12)

    def test_matches_finite_difference_on_smooth_region(self, cert05):
        points = [
            (iss_composite(cert05, 1, 1), np.array([1.0, 0.1]), np.array([-2.5, 2.5])),
            (wl_composite(cert05, 1, 1), np.array([0.4, 0.3, 0.9]),
             np.array([-1.1, 1.1, -0.00084])),
            (eta_composite(cert05, 1, 1), np.array([1.2, 0.1, 0.05]),
             np.array([-2.0, 2.0, -0.025])),
        ]
        for R, q, v in points:
            step = 1e-6
            fd = (R.value_q(q + step * v) - R.value_q(q - step * v)) / (2.0 * step)
            assert clarke_dd(R, q, v) == pytest.approx(fd, rel=1e-5)


class TestMonitorDecrease:
    def test_iss_jumps_never_increase(self, cert05):
        pol = iss_policy(cert05)
        arc = solve_policy(pol, d=0.3, x0=0.9)
        R = iss_composite(cert05, 1, 1)
        report = monitor_decrease(R, arc, lambda s: 0.42 * s, tol=1e-4)
        assert arc.executions >= 2
        assert report.max_jump_increment <= 0.0
        assert report.max_flow_violation <= 1e-4
        assert report.passed

    def test_eta_jump_keeps_value_exactly(self, cert05):
        pol = eta_policy(cert05, EtaPolicyParams(eta0=0.1))
        arc = solve_policy(pol, d=0.5, x0=1.0)
        R = eta_composite(cert05, 1, 1)
        report = monitor_decrease(R, arc, lambda s: 0.42 * s, tol=1e-4)
        assert arc.executions >= 2
        assert report.max_jump_increment == 0.0
        assert report.max_flow_violation <= 1e-4

    def test_wl_threshold_decrease(self, cert05):
        pol = wl_policy(cert05, WlPolicyParams(), example_vi_loop(0.5))
        arc = solve_policy(pol, d=0.5, x0=1.0, t_end=6.0)
        R = wl_composite(cert05, 1, 1)
        rate = 1e-3 * 0.84
        report = monitor_decrease(R, arc, lambda s: rate * s, tol=1e-4)
        assert arc.executions >= 2
        assert report.max_jump_increment <= 1e-9
        assert report.max_flow_violation <= 1e-4


class TestEstimateLipschitz:
    def test_zoh_growth_constants_match(self, cert05):
        loop = example_vi_loop(0.5)
        est = estimate_lipschitz(loop, cert05, REGION, 201)
        assert est.l1 == est.l3

    def test_extreme_point_value(self, cert05):
        with pytest.warns(UserWarning):
            loop = example_vi_loop(1.0)
        est = estimate_lipschitz(loop, cert05, REGION, 201)
        assert est.l1 >= 4.0
        assert est.l1 == pytest.approx(8.0, rel=1e-12)

    def test_gain_ratio_constant_for_quadratic_pair(self, cert05):
        loop = example_vi_loop(0.5)
        est = estimate_lipschitz(loop, cert05, REGION, 201)
        assert est.l2 == pytest.approx(3.55903, abs=1e-5)

    def test_inflation(self, cert05):
        est = estimate_lipschitz(example_vi_loop(0.5), cert05, REGION, 51)
        inf = est.inflated(1.1)
        assert inf.l1 == pytest.approx(1.1 * est.l1)

    def test_unbounded_ratio_detected(self, cert05):
        huge_gamma = IssCertificate(
            V=cert05.V, grad_V=cert05.grad_V,
            alpha_v_lower=cert05.alpha_v_lower, alpha_v_upper=cert05.alpha_v_upper,
            alpha=cert05.alpha, gamma=PowerLaw(1e30, 0.5), sigma=0.5,
        )
        with pytest.raises(UnboundedRatio):
            estimate_lipschitz(example_vi_loop(0.5), huge_gamma, REGION, 51)


class TestDwellLowerBound:
    def test_inverse_square_rate(self):
        tau = dwell_lower_bound(lambda s: (1.0 + s) ** 2, 0.0, 1.0)
        assert abs(tau - 0.5) <= 1e-9

    def test_constant_rate(self):
        assert dwell_lower_bound(lambda s: 4.0, 0.0, 1.0) == pytest.approx(0.25, rel=1e-9)

    def test_quadratic_rate_closed_form(self):
        tau = dwell_lower_bound(lambda s: 1.0 + 2.0 * s + s * s, 0.0, 1.0)
        assert tau == pytest.approx(0.5, abs=1e-9)

    def test_nonpositive_rate_diverges(self):
        with pytest.raises(DivergentIntegral):
            dwell_lower_bound(lambda s: s - 0.5, 0.0, 1.0)

    def test_rejects_bad_interval(self):
        with pytest.raises(ValueError):
            dwell_lower_bound(lambda s: 1.0, 1.0, 1.0)


def _estimates(l1, l2, l3):
    from etcsim.certificates import LipschitzEstimates

    return LipschitzEstimates(l1=l1, l2=l2, l3=l3, region=REGION, grid_n=2)


class TestDwellRates:
    def test_wl_rate_endpoints(self):
        rate = wl_dwell_rate(_estimates(1.0, 1.0, 1.0), 1e-6, 0.84, 0.5)
        assert rate(0.0) == pytest.approx(1.0)
        assert rate(1.0) == pytest.approx(4.0)

    def test_wl_clock_branch_floor(self):
        rate = wl_dwell_rate(_estimates(1e-9, 1.0, 1e-9), 0.5, 0.84, 0.5)
        assert rate(0.0) == pytest.approx(0.5 * 0.84 / 0.5)

    def test_eta_rate_coefficients(self):
        rate = eta_dwell_rate(_estimates(2.0, 1.0, 3.0))
        assert rate(0.0) == 3.0
        assert rate(1.0) == pytest.approx(3.0 + 5.0 + 2.0)


class TestCompositeValues:
    def test_zero_at_stable_set_positive_elsewhere(self, cert05):
        iss = iss_composite(cert05, 1, 1)
        wl = wl_composite(cert05, 1, 1)
        eta = eta_composite(cert05, 1, 1)
        assert iss.value_q(np.array([0.0, 0.0])) == 0.0
        assert wl.value_q(np.array([0.0, 0.0, 0.7])) == 0.0
        assert eta.value_q(np.array([0.0, 0.0, 0.0])) == 0.0
        assert iss.value_q(np.array([0.3, 0.1])) > 0.0
        assert wl.value_q(np.array([0.0, 0.2, 0.7])) > 0.0
        assert eta.value_q(np.array([0.0, 0.0, 0.4])) > 0.0

    def test_dwell_time_bound_record(self):
        from etcsim.certificates import dwell_time_bound

        bound = dwell_time_bound(lambda s: (1.0 + s) ** 2, 0.0, 1.0)
        assert bound.tau == pytest.approx(0.5, abs=1e-9)
        assert (bound.a, bound.b) == (0.0, 1.0)


class TestScalingInvariance:
    def test_scaled_certificate_same_jump_times(self, cert05):
        # Multiplying V and gamma by c > 0 rescales both guard sides, so the
        # trigger's zero set and the solved jump times are unchanged.
        base_arc = solve_policy(iss_policy(cert05), d=0.3, x0=0.8, t_end=4.0)
        scaled_arc = solve_policy(iss_policy(cert05.scaled(3.0)), d=0.3, x0=0.8, t_end=4.0)
        assert base_arc.executions == scaled_arc.executions
        assert np.array_equal(base_arc.jump_times(), scaled_arc.jump_times())
