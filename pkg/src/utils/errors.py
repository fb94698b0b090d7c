"""
Errores del sistema de integración estocástica.
Todas las clases derivan de ValueError para que el código que ya captura
datos inválidos las siga tratando igual.
"""

from typing import Optional


class InvalidStateError(ValueError):
    """Estado (x, m) con valores no finitos."""


class ParameterError(ValueError):
    """Parámetro numérico fuera de rango (orden de cuadratura, dt, eps...)."""


class UnsupportedDimensionError(ValueError):
    """Operación disponible solo para dimensiones concretas (por ejemplo d=1)."""


class CapabilityError(ValueError):
    """Falta una derivada analítica requerida por el esquema o el generador."""


class ModelViolationError(ValueError):
    """El modelo viola una hipótesis en un punto de evaluación (f <= 0)."""


class InsufficientDataError(ValueError):
    """No hay suficientes celdas utilizables para ajustar un orden."""


class ConfigurationError(ValueError):
    """
    Configuración inválida o combinación esquema/modelo incompatible.

    Attributes:
        key (str, optional): Clave de configuración que provocó el error
    """

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key

    def __str__(self) -> str:
        message = super().__str__()
        if self.key:
            return f"[{self.key}] {message}"
        return message


class NumericalFailureError(ValueError):
    """
    Demasiadas trayectorias terminaron con valores no finitos.

    Attributes:
        non_finite (int): Número de trayectorias no finitas
        samples (int): Número total de trayectorias
        step (int, optional): Paso en el que apareció el primer valor no finito
    """

    def __init__(self, non_finite: int, samples: int, step: Optional[int] = None):
        message = f"{non_finite} de {samples} trayectorias terminaron con valores no finitos"
        if step is not None:
            message += f" (paso {step})"
        super().__init__(message)
        self.non_finite = non_finite
        self.samples = samples
        self.step = step
