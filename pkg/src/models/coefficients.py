"""
Modelos lento-rápidos y coeficientes promediados / límite.

Dos familias de modelos:
- AveragingModel: dX = b(X,m) dt + σ(X,m) dB, dm = -m/ε dt + √2 h(X)/√ε dβ
- DiffusionModel: dX = b(X) dt + σ(X) m/ε dt, dm = f(X)(-m/ε² dt + g(X)/ε dt + h(X)/ε dβ)

Los coeficientes son funciones vectorizadas: x tiene forma (..., d) y m
forma (...). Las derivadas se dan siempre de forma analítica.
"""

from enum import Enum
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from pydantic import BaseModel, ConfigDict, Field

from ..utils.errors import (
    CapabilityError,
    InvalidStateError,
    ModelViolationError,
    ParameterError,
    UnsupportedDimensionError,
)

Coefficient = Callable[..., np.ndarray]

# Puntos usados para verificar min f > 0
POSITIVITY_GRID_POINTS = 1024


class Domain(str, Enum):
    TORUS = "torus"
    LINE = "line"


class AveragingModel(BaseModel):
    """
    Modelo en régimen de promediado.

    Attributes:
        d (int): Dimensión de la componente lenta
        D (int): Dimensión del proceso de Wiener B
        domain (Domain): Toro plano o recta real
        b (Callable): b(x, m) -> (..., d)
        sigma (Callable): σ(x, m) -> (..., d, D)
        h (Callable): h(x) -> (...)
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    d: int = Field(default=1, ge=1)
    D: int = Field(default=1, ge=1)
    domain: Domain = Domain.TORUS
    b: Coefficient
    sigma: Coefficient
    h: Coefficient

    @property
    def family(self) -> str:
        return "averaging"

    @property
    def noise_dim(self) -> int:
        return self.D

    def check_assumptions(self) -> None:
        """Verifica que h sea finita sobre una malla del toro."""
        grid = _unit_grid(self.d)
        if not np.all(np.isfinite(self.h(grid))):
            raise ModelViolationError("h toma valores no finitos")


class DiffusionModel(BaseModel):
    """
    Modelo en régimen de aproximación-difusión.

    Attributes:
        d (int): Dimensión de la componente lenta
        domain (Domain): Toro plano o recta real
        b, sigma (Callable): b(x), σ(x) -> (..., d)
        f, g, h (Callable): -> (...)
        dsigma (Callable, optional): ∂ₓσ(x) -> (..., d, d), con [i, j] = ∂_j σ_i
        df (Callable, optional): ∇f(x) -> (..., d)
        d2sigma (Callable, optional): σ''(x) -> (..., d), solo d=1
        d2f (Callable, optional): f''(x) -> (...), solo d=1
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    d: int = Field(default=1, ge=1)
    domain: Domain = Domain.TORUS
    b: Coefficient
    sigma: Coefficient
    f: Coefficient
    g: Coefficient
    h: Coefficient
    dsigma: Optional[Coefficient] = None
    df: Optional[Coefficient] = None
    d2sigma: Optional[Coefficient] = None
    d2f: Optional[Coefficient] = None

    @property
    def family(self) -> str:
        return "diffusion"

    @property
    def noise_dim(self) -> int:
        # Sin ruido B en la componente lenta; se conserva un Γ por paso
        # para alinear los flujos entre esquemas
        return 1

    @property
    def has_derivatives(self) -> bool:
        return self.dsigma is not None and self.df is not None

    def check_assumptions(self) -> None:
        """
        Verifica min f > 0 sobre una malla de 1024 puntos.

        Raises:
            ModelViolationError: Si f <= 0 en algún punto de la malla
        """
        f_min = float(np.min(self.f(_unit_grid(self.d))))
        if not f_min > 0:
            raise ModelViolationError(f"min f = {f_min} <= 0 viola la hipótesis f > 0")

    def positive_f(self, x: np.ndarray) -> np.ndarray:
        """Evalúa f y exige f > 0 en todos los puntos."""
        values = self.f(x)
        if np.any(values <= 0):
            raise ModelViolationError("f <= 0 en un punto de evaluación")
        return values


def _unit_grid(d: int) -> np.ndarray:
    points = np.arange(POSITIVITY_GRID_POINTS, dtype=np.float64) / POSITIVITY_GRID_POINTS
    return np.repeat(points[:, None], d, axis=1)


@lru_cache(maxsize=None)
def gauss_hermite(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodos y pesos de Gauss-Hermite para la normal estándar.

    Args:
        order (int): Número de nodos (>= 2)

    Returns:
        Tuple[np.ndarray, np.ndarray]: Nodos u_i y pesos w_i con sum w_i = 1

    Raises:
        ParameterError: Si order < 2
    """
    if order < 2:
        raise ParameterError(f"El orden de cuadratura debe ser >= 2 (recibido {order})")
    nodes, weights = hermegauss(order)
    weights = weights / np.sqrt(2.0 * np.pi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def wrap_torus(x, domain: Domain = Domain.TORUS) -> np.ndarray:
    """
    Representante canónico en [0, 1)^d de un punto del toro.

    Args:
        x: Punto o lote de puntos
        domain (Domain): En la recta se devuelve sin cambios

    Returns:
        np.ndarray: Punto reducido

    Raises:
        InvalidStateError: Si x tiene valores no finitos
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidStateError("wrap_torus recibió valores no finitos")
    if Domain(domain) is Domain.LINE:
        return x
    wrapped = np.mod(x, 1.0)
    # np.mod(-1e-18, 1.0) redondea a 1.0
    return np.where(wrapped >= 1.0, 0.0, wrapped)


def _fast_samples(model: AveragingModel, x: np.ndarray, order: int):
    nodes, weights = gauss_hermite(order)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    h = np.asarray(model.h(x), dtype=np.float64)
    if np.any(h < 0):
        raise ParameterError("h(x) debe ser no negativa")
    m = h[..., None] * nodes
    xb = np.broadcast_to(x[..., None, :], m.shape + (x.shape[-1],))
    return xb, m, weights


def averaged_drift(model: AveragingModel, x, quadrature_order: int = 32) -> np.ndarray:
    """
    Deriva promediada b̄(x) = ∫ b(x, m) dν^x(m), con ν^x = N(0, h(x)²).

    Args:
        model (AveragingModel): Modelo en régimen de promediado
        x: Punto(s) de forma (..., d)
        quadrature_order (int): Nodos de Gauss-Hermite

    Returns:
        np.ndarray: b̄(x) con forma (..., d)
    """
    xb, m, weights = _fast_samples(model, x, quadrature_order)
    values = model.b(xb, m)
    return np.einsum("...nd,n->...d", values, weights)


def averaged_covariance(model: AveragingModel, x, quadrature_order: int = 32) -> np.ndarray:
    """
    Matriz ā(x) = ∫ σσ* dν^x, con forma (..., d, d).
    """
    xb, m, weights = _fast_samples(model, x, quadrature_order)
    sig = model.sigma(xb, m)
    return np.einsum("...nij,...nkj,n->...ik", sig, sig, weights)


def averaged_diffusion(model: AveragingModel, x, quadrature_order: int = 32) -> np.ndarray:
    """
    σ̄(x) = sqrt(ā(x)) para d = 1.

    Args:
        model (AveragingModel): Modelo en régimen de promediado
        x: Punto(s) de forma (..., 1)
        quadrature_order (int): Nodos de Gauss-Hermite

    Returns:
        np.ndarray: σ̄(x) >= 0 con forma (...)

    Raises:
        UnsupportedDimensionError: Si d > 1
    """
    if model.d != 1:
        raise UnsupportedDimensionError(
            "σ̄ solo está disponible para d = 1; la factorización general no se implementa"
        )
    return np.sqrt(averaged_covariance(model, x, quadrature_order)[..., 0, 0])


def limiting_diffusion_drift(model: DiffusionModel, x) -> np.ndarray:
    """
    Deriva de la ecuación límite en régimen de difusión (forma de Itô):
    b + gσ + (h²/2)(σ·∇)σ - (h²/2f)(σ·∇f)σ.

    Args:
        model (DiffusionModel): Modelo con derivadas ∂ₓσ y ∇f
        x: Punto(s) de forma (..., d)

    Returns:
        np.ndarray: Deriva con forma (..., d)

    Raises:
        CapabilityError: Si faltan las derivadas del modelo
    """
    if not model.has_derivatives:
        raise CapabilityError("La deriva límite requiere ∂ₓσ y ∇f")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    sig = model.sigma(x)
    f = model.positive_f(x)
    g = model.g(x)
    h2 = model.h(x) ** 2
    directional = np.einsum("...ij,...j->...i", model.dsigma(x), sig)
    sig_grad_f = np.einsum("...j,...j->...", sig, model.df(x))
    return (
        model.b(x)
        + g[..., None] * sig
        + (0.5 * h2)[..., None] * directional
        - (0.5 * h2 / f * sig_grad_f)[..., None] * sig
    )
