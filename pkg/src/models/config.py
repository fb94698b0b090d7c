"""
Configuración de una ejecución de la línea de comandos y presets de experimentos.

Un archivo JSON con las mismas claves que las opciones (con guiones o con
guiones bajos) se valida con RunConfig; las opciones explícitas tienen
prioridad sobre los valores del archivo.
"""

import json
import os
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from settings import DEFAULT_DT_GRID, DEFAULT_FINAL_TIME, DEFAULT_SAMPLES
from ..utils.errors import ConfigurationError, ParameterError
from .state import SchemeParams


class Command(str, Enum):
    TRAJECTORY = "trajectory"
    WEAK_ERROR = "weak-error"
    SWEEP = "sweep"
    LIMIT_GAP = "limit-gap"
    GENERATOR_GAP = "generator-gap"


def _hyphenate(name: str) -> str:
    return name.replace("_", "-")


class RunConfig(BaseModel):
    """
    Parámetros de una ejecución.

    Attributes:
        command (Command): Subcomando
        model (str): Nombre del modelo en el registro
        scheme (List[str]): Esquemas; el segundo es la referencia o el límite
        dt, eps (float): Paso y parámetro de escala
        dt_grid, eps_grid (List[float]): Mallas estrictamente decrecientes
        theta, theta2 (float): Parámetros del método theta
        T (float): Tiempo final, múltiplo entero de dt
        samples (int): Número de trayectorias M
        seed (int): Semilla global
        observable (str): Función de prueba
        output (str): Ruta del CSV
        every (int): Submuestreo de trayectorias
        preset (str, optional): Preset de figura
    """

    model_config = ConfigDict(frozen=True, extra="forbid", alias_generator=_hyphenate,
                              populate_by_name=True)

    command: Command
    model: Optional[str] = None
    scheme: List[str] = Field(default_factory=list)
    dt: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    dt_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_DT_GRID))
    eps: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    eps_grid: Optional[List[float]] = None
    theta: float = Field(default=1.0, ge=0.5, le=1.0)
    theta2: Optional[float] = Field(default=None, ge=0.5, le=1.0)
    T: float = Field(default=DEFAULT_FINAL_TIME, gt=0.0)
    samples: int = Field(default=DEFAULT_SAMPLES, ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    observable: str = "sin2pix"
    output: str = "results.csv"
    every: int = Field(default=1, ge=1)
    preset: Optional[str] = None

    @field_validator("dt_grid", "eps_grid", mode="before")
    @classmethod
    def _split_grid(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [float(v) for v in value.split(",") if v.strip()]
        return value

    @field_validator("dt_grid", "eps_grid")
    @classmethod
    def _descending_grid(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is None:
            return value
        if any(v <= 0 or v > 1 for v in value):
            raise ValueError("los valores de la malla deben estar en (0, 1]")
        if any(a <= b for a, b in zip(value, value[1:])):
            raise ValueError("la malla debe ser estrictamente decreciente")
        return value

    @field_validator("scheme", mode="before")
    @classmethod
    def _split_schemes(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [s.strip() for s in value.split(",") if s.strip()]
        return value

    @model_validator(mode="after")
    def _final_time_multiple(self) -> "RunConfig":
        if self.dt is not None:
            n_steps = round(self.T / self.dt)
            if abs(self.T - n_steps * self.dt) > 1e-12:
                raise ValueError(f"T={self.T} no es múltiplo entero de dt={self.dt}")
        return self

    @property
    def primary_scheme(self) -> str:
        if not self.scheme:
            raise ConfigurationError("Falta el esquema", key="scheme")
        return self.scheme[0]

    @property
    def secondary_scheme(self) -> Optional[str]:
        return self.scheme[1] if len(self.scheme) > 1 else None

    def require(self, *keys: str) -> None:
        """
        Exige que las claves indicadas tengan valor.

        Raises:
            ConfigurationError: Con la primera clave ausente
        """
        for key in keys:
            value = getattr(self, key)
            if value is None or (isinstance(value, list) and not value):
                raise ConfigurationError(f"Falta un valor para '{_hyphenate(key)}'", key=_hyphenate(key))

    def scheme_params(self, eps: Optional[float] = None, dt: Optional[float] = None) -> SchemeParams:
        """
        Parámetros del esquema con T = N dt.

        Raises:
            ConfigurationError: Si falta dt o eps, o T no es múltiplo de dt
        """
        dt = self.dt if dt is None else dt
        eps = self.eps if eps is None else eps
        if dt is None:
            raise ConfigurationError("Falta un valor para 'dt'", key="dt")
        if eps is None:
            raise ConfigurationError("Falta un valor para 'eps'", key="eps")
        try:
            return SchemeParams.from_final_time(dt, self.T, eps=eps, theta=self.theta, theta2=self.theta2)
        except ParameterError as e:
            raise ConfigurationError(str(e), key="T")
        except ValidationError as e:
            raise configuration_error(e)

    @classmethod
    def load(cls, command: Command, config_path: Optional[str] = None,
             overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """
        Combina el archivo JSON (si existe) con las opciones explícitas.

        Args:
            command (Command): Subcomando
            config_path (str, optional): Ruta del JSON
            overrides (dict, optional): Opciones de la línea de comandos; None = no indicada

        Returns:
            RunConfig: Configuración validada

        Raises:
            ConfigurationError: Si el archivo o algún valor no es válido
        """
        data: Dict[str, Any] = {}
        if config_path:
            if not os.path.exists(config_path):
                raise ConfigurationError(f"El archivo no existe: {config_path}", key="config")
            try:
                with open(config_path, encoding="utf-8") as handle:
                    data = json.load(handle)
            except json.JSONDecodeError as e:
                raise ConfigurationError(f"JSON inválido: {e}", key="config")
            if not isinstance(data, dict):
                raise ConfigurationError("El archivo debe contener un objeto JSON", key="config")
            data = {key.replace("_", "-"): value for key, value in data.items()}
        for key, value in (overrides or {}).items():
            if value is not None:
                data[_hyphenate(key)] = value
        data["command"] = command
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise configuration_error(e)


def configuration_error(error: ValidationError) -> ConfigurationError:
    """Traduce el primer error de pydantic a ConfigurationError con la clave afectada."""
    first = error.errors()[0]
    key = ".".join(str(part) for part in first.get("loc", ())) or None
    return ConfigurationError(first.get("msg", str(error)), key=key)


class PresetRun(BaseModel):
    """Un esquema dentro de un preset, con su etiqueta de salida."""

    model_config = ConfigDict(frozen=True)

    label: str
    scheme: str
    theta2: Optional[float] = None


class Preset(BaseModel):
    """
    Conjunto de parámetros de una figura.

    Attributes:
        model (str): Modelo del registro
        dt, eps, T (float): Parámetros comunes
        runs (List[PresetRun]): Esquemas a ejecutar
    """

    model_config = ConfigDict(frozen=True)

    name: str
    model: str
    dt: float = 0.004
    eps: float
    T: float = 1.0
    runs: List[PresetRun]


PRESETS: Dict[str, Preset] = {
    preset.name: preset
    for preset in [
        Preset(name="fig-av1", model="avg-ex", eps=0.001, runs=[
            PresetRun(label="ap-avg", scheme="ap-avg"),
            PresetRun(label="crude-avg", scheme="crude-avg"),
            PresetRun(label="limit-avg", scheme="limit-avg"),
            PresetRun(label="ref-avg", scheme="ref-avg"),
        ]),
        Preset(name="fig-diff1", model="diff-ex1", eps=0.01, runs=[
            PresetRun(label="ap-diff", scheme="ap-diff"),
            PresetRun(label="crude-diff", scheme="crude-diff"),
            PresetRun(label="ref-diff", scheme="ref-diff"),
        ]),
        Preset(name="fig-diff1x", model="diff-ex1-line", eps=0.01, runs=[
            PresetRun(label="exp-ex1bis", scheme="exp-ex1bis"),
            PresetRun(label="ap-diff", scheme="ap-diff"),
            PresetRun(label="exp-ex1bis-mismatch", scheme="exp-ex1bis", theta2=0.5),
            PresetRun(label="ref-diff", scheme="ref-diff"),
        ]),
        Preset(name="fig-diff2", model="diff-ex2", eps=0.01, runs=[
            PresetRun(label="ap-diff", scheme="ap-diff"),
            PresetRun(label="crude-diff", scheme="crude-diff"),
            PresetRun(label="ref-diff", scheme="ref-diff"),
        ]),
    ]
}


def get_preset(name: str) -> Preset:
    """
    Raises:
        ConfigurationError: Si el preset no existe
    """
    try:
        return PRESETS[name]
    except KeyError:
        available = ", ".join(sorted(PRESETS))
        raise ConfigurationError(f"Preset desconocido '{name}'. Disponibles: {available}", key="preset")
