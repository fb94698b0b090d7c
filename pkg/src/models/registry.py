"""
Registro de modelos predefinidos (los de los experimentos numéricos, d = 1).
Cada entrada agrupa el modelo y la condición inicial (x0, m0).
"""

from typing import Dict, List, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..utils.errors import ConfigurationError
from .coefficients import AveragingModel, DiffusionModel, Domain

TWO_PI = 2.0 * np.pi

Model = Union[AveragingModel, DiffusionModel]


class ModelRegistryEntry(BaseModel):
    """
    Modelo con nombre y condición inicial.

    Attributes:
        name (str): Clave del registro
        model (Model): Modelo de promediado o de difusión
        x0 (List[float]): Estado lento inicial (longitud d)
        m0 (float): Estado rápido inicial
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    model: Model
    x0: List[float]
    m0: float = 0.0

    @property
    def family(self) -> str:
        return self.model.family


def _phase(x: np.ndarray) -> np.ndarray:
    return TWO_PI * x[..., 0]


def _ones(x: np.ndarray) -> np.ndarray:
    return np.ones(x.shape[:-1])


def _zeros(x: np.ndarray) -> np.ndarray:
    return np.zeros(x.shape[:-1])


def _zeros_vector(x: np.ndarray) -> np.ndarray:
    return np.zeros(x.shape)


def _zeros_matrix(x: np.ndarray) -> np.ndarray:
    return np.zeros(x.shape + (1,))


# --- Régimen de promediado -------------------------------------------------

def _avg_drift(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    return (np.cos(_phase(x)) * np.exp(-0.5 * np.asarray(m) ** 2))[..., None]


def _avg_no_noise(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    return np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(m)) + (1, 1))


def _avg_noise_sigma(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    values = 0.5 * np.cos(np.asarray(m)) + 0.0 * x[..., 0]
    return values[..., None, None]


def _avg_noise_h(x: np.ndarray) -> np.ndarray:
    return 1.0 + 0.5 * np.sin(_phase(x))


# --- Régimen de difusión ---------------------------------------------------

def _cos_sigma(x: np.ndarray) -> np.ndarray:
    return np.cos(_phase(x))[..., None]


def _cos_sigma_dx(x: np.ndarray) -> np.ndarray:
    return (-TWO_PI * np.sin(_phase(x)))[..., None, None]


def _cos_sigma_dxx(x: np.ndarray) -> np.ndarray:
    return (-TWO_PI ** 2 * np.cos(_phase(x)))[..., None]


def _identity_sigma(x: np.ndarray) -> np.ndarray:
    return np.array(x, dtype=np.float64, copy=True)


def _identity_sigma_dx(x: np.ndarray) -> np.ndarray:
    return np.ones(x.shape + (1,))


def _ones_vector(x: np.ndarray) -> np.ndarray:
    return np.ones(x.shape)


def _shifted_cos_f(x: np.ndarray) -> np.ndarray:
    return np.cos(_phase(x)) + 1.5


def _shifted_cos_f_dx(x: np.ndarray) -> np.ndarray:
    return (-TWO_PI * np.sin(_phase(x)))[..., None]


def _shifted_cos_f_dxx(x: np.ndarray) -> np.ndarray:
    return -TWO_PI ** 2 * np.cos(_phase(x))


def _general_b(x: np.ndarray) -> np.ndarray:
    return (0.2 * np.sin(_phase(x)))[..., None]


def _general_sigma(x: np.ndarray) -> np.ndarray:
    return (1.0 + 0.5 * np.sin(_phase(x)))[..., None]


def _general_sigma_dx(x: np.ndarray) -> np.ndarray:
    return (np.pi * np.cos(_phase(x)))[..., None, None]


def _general_sigma_dxx(x: np.ndarray) -> np.ndarray:
    return (-2.0 * np.pi ** 2 * np.sin(_phase(x)))[..., None]


def _general_g(x: np.ndarray) -> np.ndarray:
    return 0.3 * np.cos(_phase(x))


def _general_h(x: np.ndarray) -> np.ndarray:
    return 1.0 + 0.25 * np.cos(_phase(x))


def _build_registry() -> Dict[str, ModelRegistryEntry]:
    entries = [
        ModelRegistryEntry(
            name="avg-ex",
            model=AveragingModel(
                b=_avg_drift, sigma=_avg_no_noise, h=_ones,
            ),
            x0=[1.0], m0=0.0,
        ),
        ModelRegistryEntry(
            name="avg-noise",
            model=AveragingModel(
                b=_avg_drift, sigma=_avg_noise_sigma, h=_avg_noise_h,
            ),
            x0=[1.0], m0=0.0,
        ),
        ModelRegistryEntry(
            name="diff-ex1",
            model=DiffusionModel(
                b=_zeros_vector, sigma=_cos_sigma, f=_ones, g=_zeros, h=_ones,
                dsigma=_cos_sigma_dx, df=_zeros_vector,
                d2sigma=_cos_sigma_dxx, d2f=_zeros,
            ),
            x0=[1.0], m0=0.0,
        ),
        ModelRegistryEntry(
            name="diff-ex1-line",
            model=DiffusionModel(
                domain=Domain.LINE,
                b=_zeros_vector, sigma=_identity_sigma, f=_ones, g=_zeros, h=_ones,
                dsigma=_identity_sigma_dx, df=_zeros_vector,
                d2sigma=_zeros_vector, d2f=_zeros,
            ),
            x0=[1.0], m0=0.0,
        ),
        ModelRegistryEntry(
            name="diff-ex2",
            model=DiffusionModel(
                b=_zeros_vector, sigma=_ones_vector, f=_shifted_cos_f, g=_zeros, h=_ones,
                dsigma=_zeros_matrix, df=_shifted_cos_f_dx,
                d2sigma=_zeros_vector, d2f=_shifted_cos_f_dxx,
            ),
            x0=[1.0], m0=0.0,
        ),
        ModelRegistryEntry(
            name="diff-general",
            model=DiffusionModel(
                b=_general_b, sigma=_general_sigma, f=_shifted_cos_f,
                g=_general_g, h=_general_h,
                dsigma=_general_sigma_dx, df=_shifted_cos_f_dx,
                d2sigma=_general_sigma_dxx, d2f=_shifted_cos_f_dxx,
            ),
            x0=[1.0], m0=0.0,
        ),
    ]
    for entry in entries:
        entry.model.check_assumptions()
    return {entry.name: entry for entry in entries}


MODEL_REGISTRY: Dict[str, ModelRegistryEntry] = _build_registry()


def get_model(name: str) -> ModelRegistryEntry:
    """
    Busca un modelo del registro por nombre.

    Args:
        name (str): Clave del registro

    Returns:
        ModelRegistryEntry: Entrada encontrada

    Raises:
        ConfigurationError: Si el nombre no existe
    """
    try:
        return MODEL_REGISTRY[name]
    except KeyError:
        available = ", ".join(sorted(MODEL_REGISTRY))
        raise ConfigurationError(f"Modelo desconocido '{name}'. Disponibles: {available}", key="model")
