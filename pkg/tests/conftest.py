import numpy as np
import pytest

from src.models.coefficients import AveragingModel, DiffusionModel
from src.models.registry import ModelRegistryEntry, get_model


def _fast_shape(x, m):
    return np.broadcast_shapes(np.shape(x)[:-1], np.shape(m))


def averaging_entry(b=None, sigma=None, h=None, name="custom-avg") -> ModelRegistryEntry:
    """Modelo de promediado d=1 con coeficientes dados como funciones escalares de m."""
    b = b or (lambda m: np.zeros_like(m))
    sigma = sigma or (lambda m: np.zeros_like(m))
    model = AveragingModel(
        b=lambda x, m: (b(np.asarray(m, dtype=np.float64)) + np.zeros(_fast_shape(x, m)))[..., None],
        sigma=lambda x, m: (sigma(np.asarray(m, dtype=np.float64)) + np.zeros(_fast_shape(x, m)))[..., None, None],
        h=h or (lambda x: np.ones(np.shape(x)[:-1])),
    )
    return ModelRegistryEntry(name=name, model=model, x0=[0.0], m0=0.0)


def unit_diffusion_entry(sigma=None, dsigma=None, name="custom-diff") -> ModelRegistryEntry:
    """Modelo de difusión d=1 con f = h = 1, g = 0, b = 0."""
    model = DiffusionModel(
        b=lambda x: np.zeros(np.shape(x)),
        sigma=sigma or (lambda x: np.ones(np.shape(x))),
        f=lambda x: np.ones(np.shape(x)[:-1]),
        g=lambda x: np.zeros(np.shape(x)[:-1]),
        h=lambda x: np.ones(np.shape(x)[:-1]),
        dsigma=dsigma or (lambda x: np.zeros(np.shape(x) + (1,))),
        df=lambda x: np.zeros(np.shape(x)),
    )
    return ModelRegistryEntry(name=name, model=model, x0=[0.0], m0=0.0)


@pytest.fixture
def avg_ex():
    return get_model("avg-ex")


@pytest.fixture
def avg_noise():
    return get_model("avg-noise")


@pytest.fixture
def diff_ex1():
    return get_model("diff-ex1")


@pytest.fixture
def diff_ex1_line():
    return get_model("diff-ex1-line")


@pytest.fixture
def diff_ex2():
    return get_model("diff-ex2")


@pytest.fixture
def diff_general():
    return get_model("diff-general")
