import numpy as np
import pytest

from src.models.state import NoiseDraw, SchemeParams, SystemState
from src.services.schemes import step_ap_averaging
from src.services.simulation import SimulationService, simulate_paths, simulate_trajectory
from src.utils.errors import ConfigurationError, NumericalFailureError
from src.utils.rng import GaussianStream


def test_zero_steps_returns_initial_state(avg_ex):
    states = simulate_trajectory("limit-avg", avg_ex, SchemeParams(dt=0.004, eps=0.001, N=0),
                                 GaussianStream(0, 0))
    assert len(states) == 1
    np.testing.assert_array_equal(states[0].x, [1.0])


def test_two_noiseless_ap_steps(avg_ex):
    p = SchemeParams(dt=0.004, eps=0.001)
    current = SystemState(x=[1.0], m=0.0)
    path = [current.x[0]]
    for _ in range(2):
        current = step_ap_averaging(current, p, NoiseDraw.scalar(0.0), avg_ex.model)
        path.append(current.x[0])
    np.testing.assert_allclose(path, [1.0, 1.004, 1.004 + 0.004 * np.cos(2.0 * np.pi * 1.004)], atol=1e-12)
    assert path[2] == pytest.approx(1.0079987, abs=1e-7)


def test_trajectory_length_and_draw_alignment(avg_ex, diff_ex2):
    p = SchemeParams.from_final_time(0.004, 0.2, eps=0.001)
    for scheme, entry in [("ap-avg", avg_ex), ("limit-avg", avg_ex), ("ref-avg", avg_ex),
                          ("ap-diff", diff_ex2), ("ref-diff", diff_ex2)]:
        stream = GaussianStream(3, 0)
        states = simulate_trajectory(scheme, entry, p, stream)
        assert len(states) == p.N + 1
        assert stream.counter == 2 * p.N


def test_limit_schemes_leave_fast_variable_undefined(avg_ex):
    p = SchemeParams(dt=0.01, eps=0.1, N=3)
    states = simulate_trajectory("limit-avg", avg_ex, p, GaussianStream(0, 0))
    assert all(np.isnan(s.m) for s in states)
    assert all(np.all(np.isfinite(s.x)) for s in states)


@pytest.mark.parametrize("scheme, model", [("ap-avg", "avg_noise"), ("ap-diff", "diff_general"),
                                           ("crude-diff", "diff_ex1")])
def test_batch_matches_single_trajectories(scheme, model, request):
    entry = request.getfixturevalue(model)
    p = SchemeParams.from_final_time(0.01, 0.5, eps=0.1)
    batch = simulate_paths(scheme, entry, p, seed=11, trajectory_ids=[0, 5, 9], record=True)
    for row, tid in enumerate([0, 5, 9]):
        states = simulate_trajectory(scheme, entry, p, GaussianStream(11, tid))
        xs = np.stack([s.x for s in states])
        np.testing.assert_allclose(batch.x[row], xs, rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(batch.m[row], [float(s.m) for s in states], rtol=1e-13, atol=1e-13)


def test_results_do_not_depend_on_thread_count(avg_noise):
    p = SchemeParams.from_final_time(2.0 ** -5, 0.25, eps=0.01)
    ids = np.arange(3000)
    one = simulate_paths("ap-avg", avg_noise, p, seed=0, trajectory_ids=ids, threads=1)
    eight = simulate_paths("ap-avg", avg_noise, p, seed=0, trajectory_ids=ids, threads=8)
    np.testing.assert_array_equal(one.x, eight.x)
    np.testing.assert_array_equal(one.m, eight.m)


def test_record_every_keeps_final_step(avg_ex):
    p = SchemeParams(dt=0.1, eps=0.1, N=10)
    service = SimulationService("ap-avg", avg_ex, p)
    np.testing.assert_array_equal(service.record_steps(3), [0, 3, 6, 9, 10])
    batch = service.simulate_paths(0, [0, 1], record=True, every=3)
    np.testing.assert_allclose(batch.times, [0.0, 0.3, 0.6, 0.9, 1.0])
    assert batch.x.shape == (2, 5, 1)
    full = service.simulate_paths(0, [0, 1], record=True)
    np.testing.assert_array_equal(batch.x[:, -1], full.x[:, -1])
    np.testing.assert_array_equal(batch.final_x, service.simulate_paths(0, [0, 1]).final_x)


def test_initial_state_override(diff_ex1_line):
    p = SchemeParams(dt=0.01, eps=0.5, N=0)
    batch = simulate_paths("exp-ex1bis", diff_ex1_line, p, seed=0, trajectory_ids=[0], x0=[2.0], m0=0.3)
    assert batch.final_x[0, 0] == 2.0
    assert batch.final_m[0] == 0.3


def test_incompatible_pairs_are_rejected(avg_ex, diff_ex1):
    p = SchemeParams(dt=0.01, eps=0.1, N=1)
    with pytest.raises(ConfigurationError):
        SimulationService("ap-diff", avg_ex, p)
    with pytest.raises(ConfigurationError):
        SimulationService("ap-avg", diff_ex1, p)
    with pytest.raises(ConfigurationError):
        SimulationService("limit-ex1bis", diff_ex1, p)


def test_ou_exactness_of_the_fast_variable(avg_ex):
    p = SchemeParams(dt=2.0 ** -4, eps=0.25, N=4)
    samples = 100_000
    batch = simulate_paths("ap-avg", avg_ex, p, seed=1, trajectory_ids=np.arange(samples), m0=1.0)
    m = batch.final_m
    assert abs(m.mean() - np.exp(-1.0)) < 5.0 / np.sqrt(samples)
    assert abs(m.var() - (1.0 - np.exp(-2.0))) < 5.0 * np.sqrt(2.0 / samples)


@pytest.mark.parametrize("eps", [1.0, 2.0 ** -5, 2.0 ** -10])
def test_fast_moment_stays_bounded(avg_ex, eps):
    samples = 10_000
    p = SchemeParams.from_final_time(2.0 ** -4, 1.0, eps=eps)
    batch = simulate_paths("ap-avg", avg_ex, p, seed=2, trajectory_ids=np.arange(samples), record=True)
    second_moment = (batch.m ** 2).mean(axis=0)
    assert second_moment.max() <= 1.0 + 5.0 * np.sqrt(2.0 / samples)


def test_aggregated_noise_keeps_the_fast_variable_on_the_fine_path(avg_ex):
    coarse = SchemeParams.from_final_time(2.0 ** -3, 0.5, eps=0.3)
    fine = SimulationService("ap-avg", avg_ex, coarse).fine_params(8)
    assert fine.N == 32 and fine.dt == 2.0 ** -6
    ids = np.arange(50)
    fine_batch = simulate_paths("ap-avg", avg_ex, fine, seed=5, trajectory_ids=ids)
    coarse_batch = simulate_paths("ap-avg", avg_ex, coarse, seed=5, trajectory_ids=ids, refine=8)
    np.testing.assert_allclose(coarse_batch.final_m, fine_batch.final_m, atol=1e-12)
    own = simulate_paths("ap-avg", avg_ex, coarse, seed=5, trajectory_ids=ids)
    assert not np.allclose(own.final_m, fine_batch.final_m)


def test_refine_one_is_the_plain_stream(diff_ex2):
    p = SchemeParams.from_final_time(0.05, 0.5, eps=0.2)
    plain = simulate_paths("ap-diff", diff_ex2, p, seed=1, trajectory_ids=[0, 1, 2])
    same = simulate_paths("ap-diff", diff_ex2, p, seed=1, trajectory_ids=[0, 1, 2], refine=1)
    np.testing.assert_array_equal(plain.final_x, same.final_x)
    assert (plain.diverged_at == -1).all()


class TestDivergence:
    def test_single_trajectory_stops_at_the_first_non_finite_step(self, diff_ex1_line):
        p = SchemeParams(dt=0.5, eps=1e-4, N=40)
        with pytest.raises(NumericalFailureError) as exc:
            simulate_trajectory("naive-exp-ou-ex1bis", diff_ex1_line, p, GaussianStream(0, 0))
        assert 1 <= exc.value.step <= 40

    def test_batch_marks_divergent_paths(self, diff_ex1_line):
        p = SchemeParams(dt=0.5, eps=1e-4, N=40)
        batch = simulate_paths("naive-exp-ou-ex1bis", diff_ex1_line, p, seed=0,
                               trajectory_ids=np.arange(100), record=True)
        assert (batch.diverged_at >= 1).all()
        for row, step in enumerate(batch.diverged_at):
            assert np.isnan(batch.x[row, step:]).all()
            assert np.isfinite(batch.x[row, :step]).all()

    def test_stable_scheme_never_diverges(self, diff_ex1_line):
        p = SchemeParams(dt=0.5, eps=1e-4, N=40)
        batch = simulate_paths("exp-ou-ex1bis", diff_ex1_line, p, seed=0, trajectory_ids=np.arange(100))
        assert (batch.diverged_at == -1).all()
        assert np.isfinite(batch.final_x).all()
