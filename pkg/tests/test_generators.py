import numpy as np
import pytest

from conftest import unit_diffusion_entry
from src.analysis.generators import (
    consistency_residual,
    generator_avg_apply,
    generator_diff_apply,
    generator_gap,
    limiting_generator_apply,
    perturbed_phi_diff,
    perturbed_test_function,
)
from src.analysis.test_functions import (
    TEST_FUNCTIONS,
    PhaseTestFunction,
    TestFunctionBundle as FunctionBundle,
    get_test_function,
    lift,
)
from src.models.coefficients import gauss_hermite
from src.models.state import SchemeParams
from src.utils.errors import CapabilityError, ConfigurationError

X_GRID = (np.arange(64) / 64.0)[:, None]


def _zeros_like_m(x, m):
    return np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(m)))


def phase_function(value, dx, dm, dmm, dxx=None):
    dxx = dxx or (lambda x, m: _zeros_like_m(x, m)[..., None, None])
    return PhaseTestFunction(value=value, dx=dx, dxx=dxx, dm=dm, dmm=dmm)


FAST_LINEAR = phase_function(
    value=lambda x, m: m + _zeros_like_m(x, m),
    dx=lambda x, m: _zeros_like_m(x, m)[..., None],
    dm=lambda x, m: 1.0 + _zeros_like_m(x, m),
    dmm=_zeros_like_m,
)
FAST_SQUARE = phase_function(
    value=lambda x, m: m ** 2 + _zeros_like_m(x, m),
    dx=lambda x, m: _zeros_like_m(x, m)[..., None],
    dm=lambda x, m: 2.0 * m + _zeros_like_m(x, m),
    dmm=lambda x, m: 2.0 + _zeros_like_m(x, m),
)
PRODUCT = phase_function(
    value=lambda x, m: m * x[..., 0],
    dx=lambda x, m: (m + _zeros_like_m(x, m))[..., None],
    dm=lambda x, m: x[..., 0] + _zeros_like_m(x, m),
    dmm=_zeros_like_m,
)
CONSTANT = FunctionBundle(
    name="constant",
    phi=lambda x: np.full(np.shape(x)[:-1], 3.0),
    grad=lambda x: np.zeros(np.shape(x)),
    hess=lambda x: np.zeros(np.shape(x) + (1,)),
    third=lambda x: np.zeros(np.shape(x)[:-1]),
)


@pytest.mark.parametrize("name", sorted(TEST_FUNCTIONS))
def test_bundle_derivatives_match_finite_differences(name):
    bundle = get_test_function(name)
    step = 1e-5
    x = X_GRID + 0.003
    central = (bundle.phi(x + step) - bundle.phi(x - step)) / (2.0 * step)
    np.testing.assert_allclose(bundle.grad(x)[:, 0], central, atol=1e-6)
    central = (bundle.grad(x + step)[:, 0] - bundle.grad(x - step)[:, 0]) / (2.0 * step)
    np.testing.assert_allclose(bundle.hess(x)[:, 0, 0], central, atol=1e-5)
    central = (bundle.hess(x + step)[:, 0, 0] - bundle.hess(x - step)[:, 0, 0]) / (2.0 * step)
    np.testing.assert_allclose(bundle.third(x), central, atol=1e-4)


class TestAveragingGenerator:
    def test_slow_function_sees_only_slow_part(self, avg_noise):
        fn = lift(get_test_function("sin2pix"))
        x, m = np.array([0.3]), 0.7
        sig = avg_noise.model.sigma(x, m)[0, 0]
        expected = (
            avg_noise.model.b(x, m)[0] * 2.0 * np.pi * np.cos(0.6 * np.pi)
            - 0.5 * sig ** 2 * (2.0 * np.pi) ** 2 * np.sin(0.6 * np.pi)
        )
        assert generator_avg_apply(avg_noise.model, fn, x, m, 0.01) == pytest.approx(expected, abs=1e-10)

    def test_fast_polynomials(self, avg_ex):
        m = np.linspace(-2.0, 2.0, 9)
        x = np.zeros((9, 1))
        np.testing.assert_allclose(generator_avg_apply(avg_ex.model, FAST_LINEAR, x, m, 0.1), -m / 0.1)
        np.testing.assert_allclose(
            generator_avg_apply(avg_ex.model, FAST_SQUARE, x, m, 0.1), (-2.0 * m ** 2 + 2.0) / 0.1, atol=1e-12
        )

    def test_requires_second_derivatives(self, avg_ex):
        partial = PhaseTestFunction(value=FAST_LINEAR.value, dx=FAST_LINEAR.dx)
        with pytest.raises(CapabilityError):
            generator_avg_apply(avg_ex.model, partial, [0.0], 0.0, 0.1)


class TestDiffusionGenerator:
    def test_slow_function_without_noise(self, diff_general):
        fn = lift(get_test_function("cos2pix"))
        x = np.array([0.2])
        # m = 0 anula el acoplamiento σ·∇ₓ
        expected = diff_general.model.b(x)[0] * (-2.0 * np.pi * np.sin(0.4 * np.pi))
        assert generator_diff_apply(diff_general.model, fn, x, 0.0, 0.3) == pytest.approx(expected, abs=1e-12)

    def test_fast_linear(self, diff_ex1):
        m = np.linspace(-1.0, 1.0, 5)
        x = np.full((5, 1), 0.25)
        np.testing.assert_allclose(
            generator_diff_apply(diff_ex1.model, FAST_LINEAR, x, m, 0.2), -m / 0.04, atol=1e-12
        )

    def test_product(self):
        model = unit_diffusion_entry().model
        x = np.array([[0.4], [-1.2]])
        m = np.array([0.5, 2.0])
        eps = 0.3
        expected = m ** 2 / eps - m * x[:, 0] / eps ** 2
        np.testing.assert_allclose(generator_diff_apply(model, PRODUCT, x, m, eps), expected, atol=1e-12)


class TestLimitingGenerator:
    def test_examples(self, avg_ex, diff_ex1, diff_ex2):
        identity = get_test_function("identity")
        assert limiting_generator_apply(avg_ex.model, identity, [0.0], "averaging") == pytest.approx(
            1.0 / np.sqrt(2.0), abs=1e-12)
        assert limiting_generator_apply(diff_ex2.model, identity, [0.0], "diffusion") == pytest.approx(0.0, abs=1e-12)
        assert limiting_generator_apply(diff_ex1.model, identity, [0.125], "diffusion") == pytest.approx(
            -np.pi / 2.0, abs=1e-12)

    def test_averaging_limit_is_fast_average(self, avg_noise):
        bundle = get_test_function("sin2pix")
        fn = lift(bundle)
        nodes, weights = gauss_hermite(32)
        x = X_GRID
        h = avg_noise.model.h(x)
        averaged = sum(
            w * generator_avg_apply(avg_noise.model, fn, x, h * u, 1.0) for u, w in zip(nodes, weights)
        )
        np.testing.assert_allclose(
            limiting_generator_apply(avg_noise.model, bundle, x, "averaging"), averaged, atol=1e-10
        )

    def test_regime_must_match_model(self, avg_ex):
        with pytest.raises(ConfigurationError):
            limiting_generator_apply(avg_ex.model, get_test_function("identity"), [0.0], "diffusion")


class TestPerturbedTestFunction:
    def test_zero_fast_variable_gives_phi(self, diff_general):
        bundle = get_test_function("sin2pix")
        np.testing.assert_allclose(
            perturbed_phi_diff(diff_general.model, bundle, X_GRID, 0.0, 0.3), bundle.phi(X_GRID), atol=1e-15
        )

    def test_identity_with_unit_coefficients(self):
        model = unit_diffusion_entry().model
        value = perturbed_phi_diff(model, get_test_function("identity"), [0.4], 1.5, 0.2)
        assert value == pytest.approx(0.4 + 0.2 * 1.5, abs=1e-15)

    def test_pinned_value(self, diff_ex1):
        value = perturbed_phi_diff(diff_ex1.model, get_test_function("sin2pix"), [0.0], 1.0, 0.1)
        assert value == pytest.approx(0.2 * np.pi, abs=1e-12)

    def test_exact_derivatives(self, diff_general):
        fn = perturbed_test_function(diff_general.model, get_test_function("sin2pix"), 0.5)
        x = X_GRID + 0.003
        m = np.full(len(x), 1.3)
        step = 1e-6
        central = (fn.value(x + step, m) - fn.value(x - step, m)) / (2.0 * step)
        np.testing.assert_allclose(fn.dx(x, m)[:, 0], central, atol=1e-5, rtol=1e-6)
        step = 1e-5
        central = (fn.value(x, m + step) - fn.value(x, m - step)) / (2.0 * step)
        np.testing.assert_allclose(fn.dm(x, m), central, atol=1e-7)
        central = (fn.dm(x, m + step) - fn.dm(x, m - step)) / (2.0 * step)
        np.testing.assert_allclose(fn.dmm(x, m), central, atol=1e-7)


class TestGeneratorGap:
    @pytest.mark.parametrize("name", ["diff-ex1", "diff-ex2", "diff-general"])
    def test_normalized_gap_stays_bounded(self, name, request):
        entry = request.getfixturevalue(name.replace("-", "_"))
        eps_list = [2.0 ** -k for k in range(2, 9)]
        frame = generator_gap(entry.model, get_test_function("sin2pix"), eps_list)
        gaps = frame["max_normalized_gap"].to_numpy()
        assert list(frame["eps"]) == eps_list
        assert np.all(np.isfinite(gaps))
        ratios = gaps[1:] / gaps[:-1]
        assert np.all((ratios > 0.5) & (ratios < 2.0))

    def test_constant_function_has_no_gap(self, diff_ex2):
        frame = generator_gap(diff_ex2.model, CONSTANT, [0.5, 0.1])
        assert (frame["max_normalized_gap"] == 0.0).all()


class TestConsistencyResidual:
    def test_residual_shrinks_with_the_step(self, avg_ex):
        bundle = get_test_function("sin2pix")
        points = [(x, m) for x in (0.1, 0.35, 0.6, 0.85) for m in (-1.5, -0.5, 0.5, 1.5)]
        residuals = []
        for dt in (2.0 ** -2, 2.0 ** -3, 2.0 ** -4):
            rows = [consistency_residual("ap-avg", avg_ex, bundle, [x], m, SchemeParams(dt=dt, eps=1.0),
                                         samples=10_000) for x, m in points]
            residuals.append(rows)
        for coarse, fine in zip(residuals[:-1], residuals[1:]):
            for before, after in zip(coarse, fine):
                assert abs(after.mean) <= abs(before.mean) + 3.0 * (before.std_error + after.std_error)
        mean_abs = [np.mean([abs(row.mean) for row in rows]) for rows in residuals]
        assert mean_abs[0] > mean_abs[1] > mean_abs[2]

    def test_needs_a_fast_variable(self, avg_ex):
        with pytest.raises(ConfigurationError):
            consistency_residual("limit-avg", avg_ex, get_test_function("sin2pix"), [0.1], 0.0,
                                 SchemeParams(dt=0.1, eps=1.0), samples=10)
