"""
Integradores de un paso para sistemas lento-rápidos.

Cada esquema tiene un núcleo vectorizado que trabaja sobre arreglos
(x con forma (..., d), m con forma (...), gamma con forma (...),
Gamma con forma (..., D)) y una función pública step_* que recibe y
devuelve SystemState. Las etapas implícitas son lineales en la variable
rápida y se resuelven en forma cerrada.

Los esquemas límite no tienen variable rápida: devuelven m = NaN.
"""

from enum import Enum
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from settings import DEFAULT_QUADRATURE_ORDER
from ..models.coefficients import (
    AveragingModel,
    DiffusionModel,
    Domain,
    averaged_diffusion,
    averaged_drift,
    limiting_diffusion_drift,
)
from ..models.state import NoiseDraw, SchemeParams, StageValues, SystemState
from ..utils.errors import ConfigurationError

Model = Union[AveragingModel, DiffusionModel]
StepResult = Tuple[np.ndarray, np.ndarray, Optional[Dict[str, np.ndarray]]]
Kernel = Callable[..., StepResult]


class SchemeId(str, Enum):
    AP_AVG = "ap-avg"
    CRUDE_AVG = "crude-avg"
    LIMIT_AVG = "limit-avg"
    LIMIT_CRUDE_AVG = "limit-crude-avg"
    REF_AVG = "ref-avg"
    AP_DIFF = "ap-diff"
    CRUDE_DIFF = "crude-diff"
    LIMIT_DIFF = "limit-diff"
    LIMIT_CRUDE_DIFF = "limit-crude-diff"
    REF_DIFF = "ref-diff"
    EXP_EX1BIS = "exp-ex1bis"
    EXP_OU_EX1BIS = "exp-ou-ex1bis"
    NAIVE_EXP_OU_EX1BIS = "naive-exp-ou-ex1bis"
    LIMIT_EX1BIS = "limit-ex1bis"


def _matvec(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", matrix, vector)


def _no_fast(gamma: np.ndarray) -> np.ndarray:
    return np.full(np.shape(gamma), np.nan)


# --- Régimen de promediado -------------------------------------------------

def _ou_exact(m, x, params: SchemeParams, gamma, model: AveragingModel) -> np.ndarray:
    ratio = params.dt / params.eps
    decay = np.exp(-ratio)
    # 1 - e^{-2r} con expm1 para no perder precisión cuando r es pequeño
    spread = np.sqrt(-np.expm1(-2.0 * ratio))
    return decay * m + spread * model.h(x) * gamma


def _slow_avg_update(x, m_new, params: SchemeParams, Gamma, model: AveragingModel) -> np.ndarray:
    drift = model.b(x, m_new)
    noise = _matvec(model.sigma(x, m_new), Gamma)
    return x + params.dt * drift + np.sqrt(params.dt) * noise


def _ap_avg_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    m_new = _ou_exact(m, x, params, gamma, model)
    return _slow_avg_update(x, m_new, params, Gamma, model), m_new, None


def _crude_avg_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    ratio = params.dt / params.eps
    m_new = (m + np.sqrt(2.0 * ratio) * model.h(x) * gamma) / (1.0 + ratio)
    return _slow_avg_update(x, m_new, params, Gamma, model), m_new, None


def _limit_avg_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    frozen = model.h(x) * gamma
    return _slow_avg_update(x, frozen, params, Gamma, model), _no_fast(gamma), None


def _limit_crude_avg_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    frozen = np.zeros(np.shape(gamma))
    return _slow_avg_update(x, frozen, params, Gamma, model), _no_fast(gamma), None


def _ref_avg_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    drift = averaged_drift(model, x, DEFAULT_QUADRATURE_ORDER)
    x_new = x + params.dt * drift
    sigma_bar = averaged_diffusion(model, x, DEFAULT_QUADRATURE_ORDER)
    x_new = x_new + np.sqrt(params.dt) * (sigma_bar * Gamma[..., 0])[..., None]
    return x_new, _no_fast(gamma), None


# --- Régimen de difusión ---------------------------------------------------

def _theta_fast_solve(m, rate, forcing, kick, params: SchemeParams, theta: float, eps: float):
    # m' = [m(1 - (1-θ)a) + Δt·rate·forcing/ε + kick] / (1 + θa), a = Δt·rate/ε²
    a = params.dt * rate / eps ** 2
    return (m * (1.0 - (1.0 - theta) * a) + params.dt * rate * forcing / eps + kick) / (1.0 + theta * a)


def _ap_diff_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    dt, eps, theta = params.dt, params.eps, params.theta
    b = model.b(x)
    sig = model.sigma(x)
    f = model.positive_f(x)
    g = model.g(x)
    kick = f * model.h(x) * np.sqrt(dt) * gamma / eps

    # Predictor
    m_hat = _theta_fast_solve(m, f, g, kick, params, theta, eps)
    m_hat_theta = (1.0 - theta) * m + theta * m_hat
    x_hat = x + dt * b + sig * (dt * m_hat_theta / eps)[..., None]

    # Corrector con f evaluada en X̂
    f_hat = model.positive_f(x_hat)
    m_new = _theta_fast_solve(m, f_hat, g, kick, params, theta, eps)
    m_theta = (1.0 - theta) * m + theta * m_new
    y = x + dt * b + sig * (dt * m_theta / eps)[..., None]

    sig_mid = 0.5 * (sig + model.sigma(y))
    m_mid = 0.5 * (m_hat_theta + m_theta)
    x_new = x + dt * b + sig_mid * (dt / eps * m_mid)[..., None]
    return x_new, m_new, {"m_hat": m_hat, "x_hat": x_hat, "y": y}


def _limit_diff_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    sqrt_dt = np.sqrt(params.dt)
    b = model.b(x)
    sig = model.sigma(x)
    f = model.positive_f(x)
    g = model.g(x)
    h = model.h(x)
    drift = b + g[..., None] * sig
    shock = (h * sqrt_dt * gamma)[..., None]

    x_hat = x + params.dt * drift + sig * shock
    ratio = f / model.positive_f(x_hat)
    y = x + params.dt * drift + sig * ratio[..., None] * shock

    sig_mid = 0.5 * (sig + model.sigma(y))
    x_new = (
        x
        + params.dt * (b + g[..., None] * sig_mid)
        + sig_mid * (0.5 * (1.0 + ratio))[..., None] * shock
    )
    return x_new, _no_fast(gamma), {"x_hat": x_hat, "y": y}


def _crude_diff_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    dt, eps = params.dt, params.eps
    f = model.positive_f(x)
    kick = f * model.h(x) * np.sqrt(dt) * gamma / eps
    m_new = _theta_fast_solve(m, f, model.g(x), kick, params, 1.0, eps)
    x_new = x + dt * model.b(x) + model.sigma(x) * (dt * m_new / eps)[..., None]
    return x_new, m_new, None


def _limit_crude_diff_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    sig = model.sigma(x)
    drift = model.b(x) + model.g(x)[..., None] * sig
    shock = (model.h(x) * np.sqrt(params.dt) * gamma)[..., None]
    return x + params.dt * drift + sig * shock, _no_fast(gamma), None


def _ref_diff_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    drift = limiting_diffusion_drift(model, x)
    shock = (model.h(x) * np.sqrt(params.dt) * gamma)[..., None]
    return x + params.dt * drift + model.sigma(x) * shock, _no_fast(gamma), None


# --- Variantes exponenciales con σ(x) = x en la recta ---------------------

def _exp_ex1bis_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    dt, eps = params.dt, params.eps
    theta, fast_theta = params.theta, params.fast_theta
    a = dt / eps ** 2
    m_new = (m * (1.0 - (1.0 - fast_theta) * a) + np.sqrt(dt) * gamma / eps) / (1.0 + fast_theta * a)
    exponent = dt / eps * ((1.0 - theta) * m + theta * m_new)
    return x * np.exp(exponent)[..., None], m_new, None


def _exact_ou_fast(m, gamma, params: SchemeParams) -> np.ndarray:
    rate = params.dt / params.eps ** 2
    return np.exp(-rate) * m + np.sqrt(-0.5 * np.expm1(-2.0 * rate)) * gamma


def _exp_ou_ex1bis_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    m_new = _exact_ou_fast(m, gamma, params)
    exponent = params.eps * (m - m_new) + np.sqrt(params.dt) * gamma
    return x * np.exp(exponent)[..., None], m_new, None


def _naive_exp_ou_ex1bis_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    m_new = _exact_ou_fast(m, gamma, params)
    return x * np.exp(params.dt / params.eps * m_new)[..., None], m_new, None


def _limit_ex1bis_kernel(x, m, gamma, Gamma, params, model) -> StepResult:
    return x * np.exp(np.sqrt(params.dt) * gamma)[..., None], _no_fast(gamma), None


class SchemeSpec(BaseModel):
    """
    Metadatos de un esquema registrado.

    Attributes:
        scheme_id (SchemeId): Identificador
        family (str): "averaging" o "diffusion"
        evolves_fast (bool): Si el esquema hace evolucionar m
        limit (SchemeId, optional): Esquema límite asociado (ε → 0 con Δt fijo)
        line_only (bool): Solo para modelos en la recta con σ(x) = x
        kernel (Callable): Núcleo vectorizado
        fast_clock (str, optional): Escala del Ornstein-Uhlenbeck exacto que
            gamma hace avanzar ("eps" si la tasa es 1/ε, "eps2" si es 1/ε²);
            None si gamma actúa como incremento browniano
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    scheme_id: SchemeId
    family: str
    evolves_fast: bool
    limit: Optional[SchemeId] = None
    line_only: bool = False
    kernel: Kernel
    fast_clock: Optional[str] = None

    def check_model(self, model: Model) -> None:
        """
        Verifica que el esquema sea compatible con el modelo.

        Raises:
            ConfigurationError: Si la familia o el dominio no coinciden
        """
        if model.family != self.family:
            raise ConfigurationError(
                f"El esquema '{self.scheme_id.value}' es de la familia {self.family} "
                f"y el modelo es de la familia {model.family}",
                key="scheme",
            )
        if self.line_only and model.domain is not Domain.LINE:
            raise ConfigurationError(
                f"El esquema '{self.scheme_id.value}' requiere un modelo en la recta con σ(x) = x",
                key="scheme",
            )

    def fast_weights(self, fine: SchemeParams, refine: int) -> np.ndarray:
        """
        Pesos de los refine valores finos de gamma que forman el gamma de un paso grueso.

        Args:
            fine (SchemeParams): Parámetros del paso fino
            refine (int): Pasos finos por paso grueso

        Returns:
            np.ndarray: Pesos con forma (refine,)
        """
        if self.fast_clock is None:
            return np.ones(refine)
        scale = fine.eps if self.fast_clock == "eps" else fine.eps ** 2
        lags = np.arange(refine - 1, -1, -1, dtype=np.float64)
        return np.exp(-lags * fine.dt / scale)


SCHEMES: Dict[SchemeId, SchemeSpec] = {
    spec.scheme_id: spec
    for spec in [
        SchemeSpec(scheme_id=SchemeId.AP_AVG, family="averaging", evolves_fast=True,
                   limit=SchemeId.LIMIT_AVG, kernel=_ap_avg_kernel, fast_clock="eps"),
        SchemeSpec(scheme_id=SchemeId.CRUDE_AVG, family="averaging", evolves_fast=True,
                   limit=SchemeId.LIMIT_CRUDE_AVG, kernel=_crude_avg_kernel),
        SchemeSpec(scheme_id=SchemeId.LIMIT_AVG, family="averaging", evolves_fast=False,
                   kernel=_limit_avg_kernel),
        SchemeSpec(scheme_id=SchemeId.LIMIT_CRUDE_AVG, family="averaging", evolves_fast=False,
                   kernel=_limit_crude_avg_kernel),
        SchemeSpec(scheme_id=SchemeId.REF_AVG, family="averaging", evolves_fast=False,
                   kernel=_ref_avg_kernel),
        SchemeSpec(scheme_id=SchemeId.AP_DIFF, family="diffusion", evolves_fast=True,
                   limit=SchemeId.LIMIT_DIFF, kernel=_ap_diff_kernel),
        SchemeSpec(scheme_id=SchemeId.CRUDE_DIFF, family="diffusion", evolves_fast=True,
                   limit=SchemeId.LIMIT_CRUDE_DIFF, kernel=_crude_diff_kernel),
        SchemeSpec(scheme_id=SchemeId.LIMIT_DIFF, family="diffusion", evolves_fast=False,
                   kernel=_limit_diff_kernel),
        SchemeSpec(scheme_id=SchemeId.LIMIT_CRUDE_DIFF, family="diffusion", evolves_fast=False,
                   kernel=_limit_crude_diff_kernel),
        SchemeSpec(scheme_id=SchemeId.REF_DIFF, family="diffusion", evolves_fast=False,
                   kernel=_ref_diff_kernel),
        SchemeSpec(scheme_id=SchemeId.EXP_EX1BIS, family="diffusion", evolves_fast=True,
                   limit=SchemeId.LIMIT_EX1BIS, line_only=True, kernel=_exp_ex1bis_kernel),
        SchemeSpec(scheme_id=SchemeId.EXP_OU_EX1BIS, family="diffusion", evolves_fast=True,
                   limit=SchemeId.LIMIT_EX1BIS, line_only=True, kernel=_exp_ou_ex1bis_kernel,
                   fast_clock="eps2"),
        SchemeSpec(scheme_id=SchemeId.NAIVE_EXP_OU_EX1BIS, family="diffusion", evolves_fast=True,
                   line_only=True, kernel=_naive_exp_ou_ex1bis_kernel, fast_clock="eps2"),
        SchemeSpec(scheme_id=SchemeId.LIMIT_EX1BIS, family="diffusion", evolves_fast=False,
                   line_only=True, kernel=_limit_ex1bis_kernel),
    ]
}


def get_scheme(name: Union[str, SchemeId]) -> SchemeSpec:
    """
    Busca un esquema por identificador.

    Args:
        name (str): Identificador exacto, por ejemplo "ap-avg"

    Returns:
        SchemeSpec: Metadatos y núcleo del esquema

    Raises:
        ConfigurationError: Si el identificador no existe
    """
    try:
        return SCHEMES[SchemeId(name)]
    except ValueError:
        available = ", ".join(s.value for s in SchemeId)
        raise ConfigurationError(f"Esquema desconocido '{name}'. Disponibles: {available}", key="scheme")


# --- API pública por paso --------------------------------------------------

def _apply(scheme_id: SchemeId, state: SystemState, params: SchemeParams, noise: NoiseDraw,
           model: Optional[Model], debug: bool):
    kernel = SCHEMES[scheme_id].kernel
    x_new, m_new, aux = kernel(state.x, state.m, noise.gamma, noise.Gamma, params, model)
    result = SystemState(x=x_new, m=m_new)
    if debug:
        return result, StageValues(**(aux or {}))
    return result


def ou_exact_step(m, x, params: SchemeParams, gamma, model: AveragingModel) -> np.ndarray:
    """
    Paso exacto del Ornstein-Uhlenbeck rápido:
    m' = e^{-Δt/ε} m + sqrt(1 - e^{-2Δt/ε}) h(x) γ.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return _ou_exact(np.asarray(m, dtype=np.float64), x, params, np.asarray(gamma, dtype=np.float64), model)


def step_ap_averaging(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                      model: AveragingModel, debug: bool = False):
    """
    Esquema AP en régimen de promediado. b y σ se evalúan en el m ya actualizado.

    Args:
        state (SystemState): Estado (X_n, m_n)
        params (SchemeParams): Δt y ε
        noise (NoiseDraw): γ_n y Γ_n
        model (AveragingModel): Coeficientes
        debug (bool): Si además se devuelven los valores intermedios

    Returns:
        SystemState: Estado (X_{n+1}, m_{n+1})
    """
    return _apply(SchemeId.AP_AVG, state, params, noise, model, debug)


def step_crude_averaging(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                         model: AveragingModel, debug: bool = False):
    """Euler implícito en m; converge a X + Δt b(X, 0) cuando ε → 0."""
    return _apply(SchemeId.CRUDE_AVG, state, params, noise, model, debug)


def step_limit_averaging(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                         model: AveragingModel, debug: bool = False):
    """X + Δt b(X, hγ) + √Δt σ(X, hγ) Γ; ignora la componente rápida."""
    return _apply(SchemeId.LIMIT_AVG, state, params, noise, model, debug)


def step_limit_crude_averaging(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                               model: AveragingModel, debug: bool = False):
    return _apply(SchemeId.LIMIT_CRUDE_AVG, state, params, noise, model, debug)


def step_ref_averaging(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                       model: AveragingModel, debug: bool = False):
    """
    Euler-Maruyama sobre la ecuación promediada: X + Δt b̄(X) + √Δt σ̄(X) Γ_0.

    Raises:
        UnsupportedDimensionError: Si d > 1
    """
    return _apply(SchemeId.REF_AVG, state, params, noise, model, debug)


def step_ap_diffusion(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                      model: DiffusionModel, debug: bool = False):
    """
    Esquema AP en régimen de difusión (método theta con predictor y corrector).

    Args:
        state (SystemState): Estado (X_n, m_n)
        params (SchemeParams): Δt, ε y θ
        noise (NoiseDraw): Solo se usa γ_n
        model (DiffusionModel): Coeficientes
        debug (bool): Si además se devuelven m̂_{n+1}, X̂_{n+1} e Y_{n+1}

    Returns:
        SystemState | Tuple[SystemState, StageValues]

    Raises:
        ModelViolationError: Si f <= 0 en algún punto de evaluación
    """
    return _apply(SchemeId.AP_DIFF, state, params, noise, model, debug)


def step_limit_diffusion(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                         model: DiffusionModel, debug: bool = False):
    """
    Límite de step_ap_diffusion: tres etapas (X̂, Y, X).

    Raises:
        ModelViolationError: Si f <= 0 en algún punto de evaluación
    """
    return _apply(SchemeId.LIMIT_DIFF, state, params, noise, model, debug)


def step_crude_diffusion(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                         model: DiffusionModel, debug: bool = False):
    """Euler implícito en m y explícito en X (no AP)."""
    return _apply(SchemeId.CRUDE_DIFF, state, params, noise, model, debug)


def step_limit_crude_diffusion(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                               model: DiffusionModel, debug: bool = False):
    return _apply(SchemeId.LIMIT_CRUDE_DIFF, state, params, noise, model, debug)


def step_ref_diffusion(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                       model: DiffusionModel, debug: bool = False):
    """
    Euler-Maruyama sobre la ecuación límite del régimen de difusión.

    Raises:
        CapabilityError: Si el modelo no trae ∂ₓσ y ∇f
    """
    return _apply(SchemeId.REF_DIFF, state, params, noise, model, debug)


def step_exp_ex1bis(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                    model: Optional[DiffusionModel] = None, debug: bool = False):
    """
    Forma exponencial para σ(x) = x:
    X' = X exp((Δt/ε)[(1-θ)m + θm']), con m' resuelto por el método theta'.
    Con θ ≠ θ' el esquema no tiene límite cuando ε → 0.
    """
    return _apply(SchemeId.EXP_EX1BIS, state, params, noise, model, debug)


def step_exp_ou_ex1bis(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                       model: Optional[DiffusionModel] = None, debug: bool = False):
    return _apply(SchemeId.EXP_OU_EX1BIS, state, params, noise, model, debug)


def step_naive_exp_ou_ex1bis(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                             model: Optional[DiffusionModel] = None, debug: bool = False):
    return _apply(SchemeId.NAIVE_EXP_OU_EX1BIS, state, params, noise, model, debug)


def step_limit_ex1bis(state: SystemState, params: SchemeParams, noise: NoiseDraw,
                      model: Optional[DiffusionModel] = None, debug: bool = False):
    return _apply(SchemeId.LIMIT_EX1BIS, state, params, noise, model, debug)
