"""
Modelos de estado y parámetros de los esquemas numéricos.
Representa el par (X_n, m_n), el ruido de un paso y los parámetros (dt, eps, theta).

Todos los arreglos admiten un eje de lote al inicio: x tiene forma (..., d)
y m forma (...), de modo que un mismo paso avanza muchas trayectorias a la vez.
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..utils.errors import InvalidStateError, ParameterError


class SystemState(BaseModel):
    """
    Estado del sistema lento-rápido.

    Attributes:
        x (np.ndarray): Componente lenta, forma (..., d); no se reduce módulo 1
        m (np.ndarray): Componente rápida, forma (...); NaN para esquemas límite
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x: np.ndarray
    m: np.ndarray

    @field_validator("x", mode="before")
    @classmethod
    def _as_vector(cls, value) -> np.ndarray:
        return np.atleast_1d(np.asarray(value, dtype=np.float64))

    @field_validator("m", mode="before")
    @classmethod
    def _as_array(cls, value) -> np.ndarray:
        return np.asarray(value, dtype=np.float64)

    def ensure_finite(self, check_m: bool = True) -> "SystemState":
        """
        Verifica que el estado no tenga NaN ni infinitos.

        Args:
            check_m (bool): Si también se verifica la componente rápida

        Returns:
            SystemState: El mismo estado

        Raises:
            InvalidStateError: Si hay valores no finitos
        """
        if not np.all(np.isfinite(self.x)):
            raise InvalidStateError("La componente lenta contiene valores no finitos")
        if check_m and not np.all(np.isfinite(self.m)):
            raise InvalidStateError("La componente rápida contiene valores no finitos")
        return self


class NoiseDraw(BaseModel):
    """
    Ruido de un paso: gamma escalar y Gamma de dimensión D (con eje de lote opcional).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    gamma: np.ndarray
    Gamma: np.ndarray

    @field_validator("gamma", mode="before")
    @classmethod
    def _gamma_array(cls, value) -> np.ndarray:
        return np.asarray(value, dtype=np.float64)

    @field_validator("Gamma", mode="before")
    @classmethod
    def _Gamma_vector(cls, value) -> np.ndarray:
        return np.atleast_1d(np.asarray(value, dtype=np.float64))

    @model_validator(mode="after")
    def _finite(self) -> "NoiseDraw":
        if not (np.all(np.isfinite(self.gamma)) and np.all(np.isfinite(self.Gamma))):
            raise InvalidStateError("El ruido contiene valores no finitos")
        return self

    @classmethod
    def scalar(cls, gamma: float, Gamma: Optional[float] = None, noise_dim: int = 1) -> "NoiseDraw":
        """Construye el ruido de una sola trayectoria (Gamma nulo si no se indica)."""
        if Gamma is None:
            return cls(gamma=gamma, Gamma=np.zeros(noise_dim))
        return cls(gamma=gamma, Gamma=np.full(noise_dim, Gamma, dtype=np.float64))


class SchemeParams(BaseModel):
    """
    Parámetros de un esquema: T = N * dt.

    Attributes:
        dt (float): Paso de tiempo, en (0, 1]
        eps (float): Parámetro de separación de escalas, en (0, 1]
        theta (float): Theta del método theta, en [1/2, 1]
        theta2 (float, optional): Theta' de la parte rápida; por defecto theta
        N (int): Número de pasos
    """

    model_config = ConfigDict(frozen=True)

    dt: float = Field(gt=0.0, le=1.0, description="Paso de tiempo Δt")
    eps: float = Field(gt=0.0, le=1.0, description="Parámetro de escala ε")
    theta: float = Field(default=1.0, ge=0.5, le=1.0, description="θ del método theta")
    theta2: Optional[float] = Field(default=None, ge=0.5, le=1.0, description="θ′ de la parte rápida")
    N: int = Field(default=1, ge=0, description="Número de pasos")

    @property
    def fast_theta(self) -> float:
        """θ′ efectivo (igual a θ si no se especificó)."""
        return self.theta if self.theta2 is None else self.theta2

    def with_eps(self, eps: float) -> "SchemeParams":
        return SchemeParams(**{**self.model_dump(), "eps": eps})

    @classmethod
    def from_final_time(cls, dt: float, final_time: float, **kwargs) -> "SchemeParams":
        """
        Construye parámetros a partir de T, exigiendo que T sea múltiplo de dt.

        Raises:
            ParameterError: Si |T - N dt| > 1e-12
        """
        n_steps = int(round(final_time / dt))
        if abs(final_time - n_steps * dt) > 1e-12:
            raise ParameterError(f"T={final_time} no es múltiplo entero de dt={dt}")
        return cls(dt=dt, N=n_steps, **kwargs)


class StageValues(BaseModel):
    """Valores intermedios de un paso (modo depuración): m̂, X̂ e Y."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    m_hat: Optional[np.ndarray] = None
    x_hat: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
