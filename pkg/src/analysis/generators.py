"""
Generadores infinitesimales, función de prueba perturbada del régimen de
difusión y diagnósticos asociados.

Generador en régimen de promediado:
    L^ε = (1/ε)(-m ∂ₘ + h² ∂ₘ²) + b·∇ₓ + ½ σσ*:∇ₓ²
Generador en régimen de difusión:
    L^ε = (1/ε²)(-f m ∂ₘ + ½ f²h² ∂ₘ²) + (1/ε)(m σ·∇ₓ + f g ∂ₘ) + b·∇ₓ
"""

from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from settings import DEFAULT_QUADRATURE_ORDER
from ..models.coefficients import (
    AveragingModel,
    DiffusionModel,
    averaged_covariance,
    averaged_drift,
    limiting_diffusion_drift,
)
from ..models.registry import ModelRegistryEntry
from ..models.state import SchemeParams
from ..services.montecarlo import reduce_samples
from ..services.schemes import get_scheme
from ..services.simulation import SimulationService
from ..utils.errors import (
    CapabilityError,
    ConfigurationError,
    UnsupportedDimensionError,
)
from .test_functions import PhaseTestFunction, TestFunctionBundle, lift

# Celdas con ε|m| + ε²m² por debajo de este valor no se normalizan
GAP_DENOMINATOR_FLOOR = 1e-12


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", a, b)


def _require(fn: PhaseTestFunction, *names: str) -> None:
    missing = [name for name in names if getattr(fn, name) is None]
    if missing:
        raise CapabilityError(f"La función de prueba no tiene {', '.join(missing)}")


def _as_points(x, m):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    m = np.asarray(m, dtype=np.float64)
    return x, m


def generator_avg_apply(model: AveragingModel, fn: PhaseTestFunction, x, m, eps: float) -> np.ndarray:
    """
    Aplica L^ε del régimen de promediado a φ(x, m).

    Args:
        model (AveragingModel): Coeficientes
        fn (PhaseTestFunction): φ con ∇ₓ, ∇ₓ², ∂ₘ y ∂ₘ²
        x: Punto(s) de forma (..., d)
        m: Valor(es) de la componente rápida
        eps (float): ε

    Returns:
        np.ndarray: L^ε φ(x, m)

    Raises:
        CapabilityError: Si faltan derivadas de φ
    """
    _require(fn, "dxx", "dm", "dmm")
    x, m = _as_points(x, m)
    h = model.h(x)
    fast = -m * fn.dm(x, m) + h ** 2 * fn.dmm(x, m)
    sig = model.sigma(x, m)
    diffusion = np.einsum("...ij,...kj->...ik", sig, sig)
    slow = _dot(model.b(x, m), fn.dx(x, m)) + 0.5 * np.einsum("...ij,...ij->...", diffusion, fn.dxx(x, m))
    return fast / eps + slow


def generator_diff_apply(model: DiffusionModel, fn: PhaseTestFunction, x, m, eps: float) -> np.ndarray:
    """
    Aplica L^ε del régimen de difusión a φ(x, m).

    Raises:
        CapabilityError: Si φ no trae ∂ₘ y ∂ₘ²
    """
    _require(fn, "dm", "dmm")
    x, m = _as_points(x, m)
    f = model.positive_f(x)
    h = model.h(x)
    dm = fn.dm(x, m)
    grad = fn.dx(x, m)
    stiff = -f * m * dm + 0.5 * f ** 2 * h ** 2 * fn.dmm(x, m)
    coupling = m * _dot(model.sigma(x), grad) + f * model.g(x) * dm
    return stiff / eps ** 2 + coupling / eps + _dot(model.b(x), grad)


def limiting_generator_apply(model: Union[AveragingModel, DiffusionModel], bundle: TestFunctionBundle,
                             x, regime: str) -> np.ndarray:
    """
    Aplica el generador de la ecuación límite a φ(x).

    Args:
        model: Modelo de la familia indicada por regime
        bundle (TestFunctionBundle): φ con gradiente y hessiana
        x: Punto(s) de forma (..., d)
        regime (str): "averaging" o "diffusion"

    Returns:
        np.ndarray: Lφ(x)

    Raises:
        ConfigurationError: Si regime no coincide con la familia del modelo
        CapabilityError: Si faltan derivadas del modelo (régimen de difusión)
    """
    if regime != model.family:
        raise ConfigurationError(
            f"Régimen '{regime}' incompatible con un modelo de la familia {model.family}", key="regime"
        )
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    grad = bundle.grad(x)
    hess = bundle.hess(x)
    if regime == "averaging":
        drift = averaged_drift(model, x, DEFAULT_QUADRATURE_ORDER)
        covariance = averaged_covariance(model, x, DEFAULT_QUADRATURE_ORDER)
    else:
        drift = limiting_diffusion_drift(model, x)
        sig = model.sigma(x) * model.h(x)[..., None]
        covariance = np.einsum("...i,...k->...ik", sig, sig)
    return _dot(drift, grad) + 0.5 * np.einsum("...ij,...ij->...", covariance, hess)


class _CorrectorTerms:
    """
    Términos de φ₁ = m u y φ₂ = (m²/2) v en d = 1, con u = σφ'/f y v = σu'/f.
    """

    def __init__(self, model: DiffusionModel, bundle: TestFunctionBundle, x: np.ndarray,
                 second_order: bool = False):
        if model.d != 1:
            raise UnsupportedDimensionError("La función de prueba perturbada solo existe para d = 1")
        if not model.has_derivatives:
            raise CapabilityError("La función de prueba perturbada requiere ∂ₓσ y ∂ₓf")
        sigma = model.sigma(x)[..., 0]
        dsigma = model.dsigma(x)[..., 0, 0]
        f = model.positive_f(x)
        df = model.df(x)[..., 0]
        d1 = bundle.grad(x)[..., 0]
        d2 = bundle.hess(x)[..., 0, 0]

        q = sigma * d1
        p = dsigma * d1 + sigma * d2
        self.phi = bundle.phi(x)
        self.d1 = d1
        self.u = q / f
        self.du = p / f - q * df / f ** 2
        self.v = sigma * self.du / f
        self.dv = None
        if second_order:
            if model.d2sigma is None or model.d2f is None:
                raise CapabilityError("El gradiente de φ^ε requiere σ'' y f''")
            d3 = bundle.require_third()(x)
            d2sigma = model.d2sigma(x)[..., 0]
            d2f = model.d2f(x)
            dp = d2sigma * d1 + 2.0 * dsigma * d2 + sigma * d3
            ddu = dp / f - 2.0 * p * df / f ** 2 - q * d2f / f ** 2 + 2.0 * q * df ** 2 / f ** 3
            self.dv = (dsigma * self.du + sigma * ddu) / f - sigma * self.du * df / f ** 2


def perturbed_phi_diff(model: DiffusionModel, bundle: TestFunctionBundle, x, m, eps: float) -> np.ndarray:
    """
    Evalúa φ^ε = φ + εφ₁ + ε²φ₂ en d = 1, con
    φ₁ = m σφ'/f y φ₂ = (m²/2)(σ/f)(σφ'/f)'.

    Args:
        model (DiffusionModel): Modelo con ∂ₓσ y ∂ₓf
        bundle (TestFunctionBundle): φ con dos derivadas
        x: Punto(s) de forma (..., 1)
        m: Componente rápida
        eps (float): ε

    Returns:
        np.ndarray: φ^ε(x, m)

    Raises:
        UnsupportedDimensionError: Si d > 1
        CapabilityError: Si el modelo no trae derivadas
    """
    x, m = _as_points(x, m)
    terms = _CorrectorTerms(model, bundle, x)
    return terms.phi + eps * m * terms.u + eps ** 2 * 0.5 * m ** 2 * terms.v


def perturbed_test_function(model: DiffusionModel, bundle: TestFunctionBundle, eps: float) -> PhaseTestFunction:
    """
    φ^ε como PhaseTestFunction, con ∇ₓ, ∂ₘ y ∂ₘ² exactos (d = 1).

    Requiere σ'', f'' en el modelo y φ''' en la función de prueba.
    """

    def _value(x, m):
        return perturbed_phi_diff(model, bundle, x, m, eps)

    def _dx(x, m):
        x, m = _as_points(x, m)
        t = _CorrectorTerms(model, bundle, x, second_order=True)
        return (t.d1 + eps * m * t.du + eps ** 2 * 0.5 * m ** 2 * t.dv)[..., None]

    def _dm(x, m):
        x, m = _as_points(x, m)
        t = _CorrectorTerms(model, bundle, x)
        return eps * t.u + eps ** 2 * m * t.v

    def _dmm(x, m):
        x, m = _as_points(x, m)
        t = _CorrectorTerms(model, bundle, x)
        return eps ** 2 * t.v + 0.0 * m

    return PhaseTestFunction(name=f"{bundle.name}^eps", value=_value, dx=_dx, dm=_dm, dmm=_dmm)


def generator_gap(model: DiffusionModel, bundle: TestFunctionBundle, eps_list: Sequence[float],
                  x_grid: Optional[np.ndarray] = None, m_grid: Optional[np.ndarray] = None) -> pd.DataFrame:
    """
    Máximo sobre la malla de |L^ε φ^ε - Lφ| / (ε|m| + ε²m²) para cada ε.

    Args:
        model (DiffusionModel): Modelo con derivadas hasta segundo orden
        bundle (TestFunctionBundle): φ con tres derivadas
        eps_list (Sequence[float]): Valores de ε
        x_grid (np.ndarray, optional): Puntos x; por defecto 64 puntos en [0, 1)
        m_grid (np.ndarray, optional): Puntos m; por defecto 13 puntos en [-3, 3]

    Returns:
        pd.DataFrame: Columnas eps, max_normalized_gap
    """
    if x_grid is None:
        x_grid = np.arange(64) / 64.0
    if m_grid is None:
        m_grid = np.linspace(-3.0, 3.0, 13)
    xx, mm = np.meshgrid(np.asarray(x_grid, dtype=np.float64), np.asarray(m_grid, dtype=np.float64),
                         indexing="ij")
    points = xx[..., None]
    limit = limiting_generator_apply(model, bundle, points, "diffusion")

    gaps = []
    for eps in eps_list:
        phi_eps = perturbed_test_function(model, bundle, eps)
        numerator = np.abs(generator_diff_apply(model, phi_eps, points, mm, eps) - limit)
        denominator = eps * np.abs(mm) + eps ** 2 * mm ** 2
        kept = denominator >= GAP_DENOMINATOR_FLOOR
        gap = float(np.max(numerator[kept] / denominator[kept])) if np.any(kept) else 0.0
        gaps.append(gap)
    return pd.DataFrame({"eps": [float(e) for e in eps_list], "max_normalized_gap": gaps})


def consistency_residual(scheme: str, entry: ModelRegistryEntry, fn: Union[PhaseTestFunction, TestFunctionBundle],
                         x: Sequence[float], m: float, params: SchemeParams, samples: int,
                         seed: int = 0, threads: Optional[int] = None):
    """
    Residuo de consistencia débil de un paso:
    (E[φ(Φ_Δt(x, m))] - φ(x, m)) / Δt - L^ε φ(x, m).

    Args:
        scheme (str): Esquema con variable rápida
        entry (ModelRegistryEntry): Modelo
        fn: φ(x, m) o φ(x)
        x, m: Punto de partida
        params (SchemeParams): Δt y ε (se usa N = 1)
        samples (int): Trayectorias
        seed (int): Semilla

    Returns:
        Estimate: Residuo medio y su error estándar

    Raises:
        ConfigurationError: Si el esquema no hace evolucionar m
    """
    if isinstance(fn, TestFunctionBundle):
        fn = lift(fn)
    spec = get_scheme(scheme)
    if not spec.evolves_fast:
        raise ConfigurationError(
            f"El esquema '{spec.scheme_id.value}' no tiene variable rápida", key="scheme"
        )
    one_step = SchemeParams(**{**params.model_dump(), "N": 1})
    service = SimulationService(spec.scheme_id, entry, one_step, x0=x, m0=m)
    batch = service.simulate_paths(seed, np.arange(samples), threads=threads)

    start_x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    start = float(fn.value(start_x, m))
    increments = (fn.value(batch.final_x, batch.final_m) - start) / params.dt
    if entry.family == "averaging":
        generator = generator_avg_apply(entry.model, fn, start_x, m, params.eps)
    else:
        generator = generator_diff_apply(entry.model, fn, start_x, m, params.eps)
    estimate = reduce_samples(increments)
    return estimate._replace(mean=estimate.mean - float(generator))
