"""
Comprobaciones estadísticas de extremo a extremo (marcadas como lentas).

Las tablas de precisión uniforme usan mallas algo más cortas que las del
subcomando sweep documentado en el README.
"""

import numpy as np
import pytest

from src.models.registry import get_model
from src.models.state import SchemeParams
from src.services.montecarlo import (
    ReferenceSpec,
    coupled_limit_gap,
    estimate_expectation,
    fit_order,
    get_observable,
    one_step_mean_drift,
    weak_error_table,
)
from src.services.simulation import simulate_trajectory
from src.utils.rng import GaussianStream

pytestmark = pytest.mark.slow

DT_COARSE = 2.0 ** -6


class TestUniformAccuracy:
    def test_fixed_eps_order_one(self, avg_ex):
        dt_grid = [2.0 ** -k for k in range(4, 10)]
        table = weak_error_table("ap-avg", ReferenceSpec(), avg_ex, get_observable("sin2pix"),
                                 dt_grid, [1.0], samples=5000)
        fit = fit_order(table.at_eps(1.0))
        assert fit.used >= 5
        assert 0.8 <= fit.slope <= 1.2, fit

    def test_sup_over_eps_is_at_least_order_one_half(self, avg_ex):
        dt_grid = [2.0 ** -k for k in range(4, 9)]
        eps_grid = [2.0 ** -k for k in range(0, 11)]
        table = weak_error_table("ap-avg", ReferenceSpec(), avg_ex, get_observable("sin2pix"),
                                 dt_grid, eps_grid, samples=4000)
        fit = fit_order(table.sup_over_eps())
        assert fit.used >= 4
        # la cota uniforme es de orden 1/2; en avg-ex el supremo puede decaer más rápido
        assert 0.35 <= fit.slope <= 1.2, fit


class TestCrudeAveragingDefect:
    def test_crude_scheme_follows_the_frozen_drift(self, avg_ex):
        p = SchemeParams.from_final_time(0.004, 1.0, eps=1e-8)
        states = simulate_trajectory("crude-avg", avg_ex, p, GaussianStream(seed=0, trajectory_id=0))
        model = avg_ex.model
        for before, after in zip(states[:-1], states[1:]):
            frozen = before.x + p.dt * model.b(before.x, 0.0)
            assert np.max(np.abs(after.x - frozen)) <= 1e-6

    def test_crude_endpoint_is_far_from_the_average(self, avg_ex):
        p = SchemeParams.from_final_time(0.004, 1.0, eps=1e-8)
        identity = get_observable("identity")
        means = {
            scheme: estimate_expectation(scheme, avg_ex, identity, p, samples=2000, seed=1).mean
            for scheme in ("ap-avg", "crude-avg", "ref-avg")
        }
        ap_error = abs(means["ap-avg"] - means["ref-avg"])
        crude_error = abs(means["crude-avg"] - means["ref-avg"])
        assert crude_error > 10.0 * ap_error


class TestDiffusionLimit:
    @pytest.mark.parametrize("name", ["diff-ex1", "diff-ex2"])
    def test_gap_shrinks_with_eps(self, name):
        entry = get_model(name)
        p = SchemeParams.from_final_time(DT_COARSE, 1.0, eps=1.0)
        eps_list = [2.0 ** -k for k in range(6, 11)]
        gaps = np.array([row.gap for row in coupled_limit_gap("ap-diff", "limit-diff", entry, p, eps_list,
                                                              samples=1000)])
        ratios = gaps[:-1] / gaps[1:]
        # el resto es de orden ε² cuando el paso rápido es implícito (θ = 1)
        assert np.all((ratios >= 1.4) & (ratios <= 4.6)), ratios


class TestStratonovichCorrection:
    def test_limit_scheme_captures_the_correction(self, diff_ex1):
        dt = 2.0 ** -10
        p = SchemeParams(dt=dt, eps=1.0)
        est = one_step_mean_drift("limit-diff", diff_ex1, p, [0.125], 0.0, samples=1_000_000)
        assert abs(est.mean + np.pi / 2.0) < 3.0 * est.std_error + 20.0 * dt

    def test_uncorrected_limit_has_no_drift(self, diff_ex1):
        p = SchemeParams(dt=2.0 ** -10, eps=1.0)
        est = one_step_mean_drift("limit-crude-diff", diff_ex1, p, [0.125], 0.0, samples=1_000_000)
        assert abs(est.mean + np.pi / 2.0) > 5.0 * est.std_error


class TestNoiseInducedDrift:
    def test_drift_converges_to_two_pi_over_three(self, diff_ex2):
        target = 2.0 * np.pi / 3.0
        estimates = {
            dt: one_step_mean_drift("limit-diff", diff_ex2, SchemeParams(dt=dt, eps=1.0), [0.25], 0.0,
                                    samples=1_000_000)
            for dt in (1e-2, 1e-3)
        }
        residuals = {dt: abs(est.mean - target) for dt, est in estimates.items()}
        assert residuals[1e-3] < residuals[1e-2]
        fine = estimates[1e-3]
        assert residuals[1e-3] < 3.0 * fine.std_error + 100.0 * 1e-3


class TestExponentialVariant:
    def test_matched_theta_reaches_the_limit(self, diff_ex1_line):
        p = SchemeParams.from_final_time(DT_COARSE, 1.0, eps=1.0)
        rows = coupled_limit_gap("exp-ex1bis", "limit-ex1bis", diff_ex1_line, p, [1e-8], samples=200)
        assert rows[0].gap <= 1e-6

    def test_mismatched_theta_keeps_a_gap(self, diff_ex1_line):
        p = SchemeParams.from_final_time(DT_COARSE, 1.0, eps=1.0, theta=1.0, theta2=0.5)
        rows = coupled_limit_gap("exp-ex1bis", "limit-ex1bis", diff_ex1_line, p, [1e-8], samples=200)
        assert rows[0].gap > 100.0 * 1e-6
        eps_list = [2.0 ** -k for k in range(10, 21)]
        gaps = np.array([row.gap for row in coupled_limit_gap("exp-ex1bis", "limit-ex1bis", diff_ex1_line,
                                                              p, eps_list, samples=200)])
        assert np.all(gaps[1:] >= 0.9 * gaps[:-1]), gaps
