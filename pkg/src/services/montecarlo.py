"""
Servicio de Monte Carlo.
Estima esperanzas E[φ(X_N)], construye tablas de error débil sobre mallas
(Δt, ε), ajusta órdenes de convergencia y mide la distancia acoplada entre
un esquema y su esquema límite.
"""

from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from settings import MAX_NON_FINITE_RATE, REFERENCE_DT_DIVISOR
from ..analysis.test_functions import get_test_function
from ..models.coefficients import Domain
from ..models.registry import ModelRegistryEntry
from ..models.state import SchemeParams
from ..utils.console import progress, warning
from ..utils.errors import (
    ConfigurationError,
    InsufficientDataError,
    NumericalFailureError,
    ParameterError,
)
from .schemes import SchemeId, get_scheme
from .simulation import SimulationService

TABLE_COLUMNS = ["dt", "eps", "scheme", "estimate", "std_error", "error", "error_std", "samples"]
MIN_TABLE_SAMPLES = 100


class Observable(BaseModel):
    """
    Función observada en el estado final.

    Attributes:
        name (str): Nombre
        eval (Callable): φ(x) con x de forma (..., d) -> (...)
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    eval: Callable[[np.ndarray], np.ndarray]


def get_observable(name: str) -> Observable:
    """Observable del registro (identity, sin2pix, cos2pix)."""
    bundle = get_test_function(name)
    return Observable(name=bundle.name, eval=bundle.phi)


class Estimate(NamedTuple):
    mean: float
    std_error: float
    samples: int
    non_finite: int = 0


class OrderFit(NamedTuple):
    slope: float
    intercept: float
    r2: float
    used: int
    excluded: int


class GapRow(NamedTuple):
    eps: float
    gap: float
    gap_std: float


class ReferenceSpec(BaseModel):
    """
    Referencia de una tabla de error débil.

    Attributes:
        scheme (str, optional): Esquema de referencia; None = el mismo esquema
        dt (float, optional): Paso de la referencia; None = min(dt_grid) / 16
    """

    model_config = ConfigDict(frozen=True)

    scheme: Optional[str] = None
    dt: Optional[float] = None

    def resolve(self, scheme: str, dt_grid: Sequence[float]) -> Tuple[str, float]:
        ref_scheme = scheme if self.scheme is None else get_scheme(self.scheme).scheme_id.value
        ref_dt = self.dt if self.dt is not None else min(dt_grid) / REFERENCE_DT_DIVISOR
        return ref_scheme, ref_dt

    def describe(self, scheme: str, dt_grid: Sequence[float]) -> str:
        ref_scheme, ref_dt = self.resolve(scheme, dt_grid)
        kind = "autorreferencia" if ref_scheme == scheme else "esquema de referencia"
        return f"{kind}: {ref_scheme} con dt={ref_dt:.17g}, el mismo ε y ruido acoplado por trayectoria"


def reduce_samples(values: np.ndarray) -> Estimate:
    samples = values.shape[0]
    finite = np.isfinite(values)
    non_finite = int(samples - np.count_nonzero(finite))
    if non_finite > MAX_NON_FINITE_RATE * samples:
        raise NumericalFailureError(non_finite, samples)
    if non_finite:
        warning(f"{non_finite} de {samples} trayectorias no finitas descartadas")
    kept = values[finite]
    if kept.size < 2:
        raise NumericalFailureError(non_finite, samples)
    if np.ptp(kept) == 0.0:
        return Estimate(float(kept[0]), 0.0, samples, non_finite)
    mean = float(np.mean(kept))
    std_error = float(np.std(kept, ddof=1) / np.sqrt(kept.size))
    return Estimate(mean, std_error, samples, non_finite)


def estimate_expectation(scheme: Union[str, SchemeId], entry: ModelRegistryEntry,
                         observable: Observable, params: SchemeParams, samples: int,
                         seed: int = 0, x0: Optional[Sequence[float]] = None,
                         m0: Optional[float] = None, threads: Optional[int] = None) -> Estimate:
    """
    Estima E[φ(X_N)] con trayectorias de identificador 0..M-1.

    Args:
        scheme (str): Identificador del esquema
        entry (ModelRegistryEntry): Modelo del registro
        observable (Observable): φ
        params (SchemeParams): Parámetros del esquema
        samples (int): M >= 2
        seed (int): Semilla global
        x0, m0: Condición inicial alternativa
        threads (int, optional): Hilos de trabajo

    Returns:
        Estimate: Media, error estándar, M y número de trayectorias no finitas

    Raises:
        ParameterError: Si M < 2
        NumericalFailureError: Si más del 0.1% de las trayectorias no son finitas
    """
    if samples < 2:
        raise ParameterError(f"Se necesitan al menos 2 muestras (recibido {samples})")
    service = SimulationService(scheme, entry, params, x0, m0)
    batch = service.simulate_paths(seed, np.arange(samples), threads=threads)
    return reduce_samples(np.asarray(observable.eval(batch.final_x), dtype=np.float64))


class WeakErrorTable:
    """
    Tabla de errores débiles.

    Cada fila guarda (dt, eps, scheme, reference_scheme, estimate, std_error,
    error, error_std, samples) con error = |media(esquema) - media(referencia)|.
    """

    def __init__(self, rows: List[Dict[str, Any]], reference: str = ""):
        self.frame = pd.DataFrame(rows, columns=TABLE_COLUMNS + ["reference_scheme"])
        self.reference = reference

    def __len__(self) -> int:
        return len(self.frame)

    def to_csv_frame(self) -> pd.DataFrame:
        """Columnas en el orden del CSV."""
        return self.frame[TABLE_COLUMNS].reset_index(drop=True)

    def at_eps(self, eps: float) -> pd.DataFrame:
        """Filas con un ε dado, ordenadas por dt descendente."""
        rows = self.frame[np.isclose(self.frame["eps"], eps, rtol=1e-12, atol=0.0)]
        return rows.sort_values("dt", ascending=False).reset_index(drop=True)

    def sup_over_eps(self) -> pd.DataFrame:
        """Para cada dt, la fila con el mayor error sobre ε."""
        idx = self.frame.groupby("dt")["error"].idxmax()
        rows = self.frame.loc[idx, ["dt", "eps", "error", "error_std"]]
        return rows.sort_values("dt", ascending=False).reset_index(drop=True)


def _refinement(dt: float, ref_dt: float) -> Optional[int]:
    # pasos de referencia por paso grueso, si dt es múltiplo entero de ref_dt
    refine = int(round(dt / ref_dt))
    if refine >= 1 and abs(refine * ref_dt - dt) <= 1e-9 * dt:
        return refine
    return None


def weak_error_table(scheme: Union[str, SchemeId], reference: ReferenceSpec,
                     entry: ModelRegistryEntry, observable: Observable,
                     dt_grid: Sequence[float], eps_grid: Sequence[float], samples: int,
                     seed: int = 0, final_time: float = 1.0, theta: float = 1.0,
                     theta2: Optional[float] = None,
                     threads: Optional[int] = None) -> WeakErrorTable:
    """
    Construye la tabla de error débil sobre dt_grid x eps_grid.

    Cada celda se acopla trayectoria a trayectoria con la referencia: cuando
    dt es múltiplo de dt_ref, el ruido de cada paso grueso es el agregado de
    los pasos finos que consume la referencia con el mismo trajectory_id, y
    error_std es el error estándar de las diferencias emparejadas. Si dt no
    es múltiplo, la celda usa su propio flujo y los errores estándar se
    combinan en cuadratura.

    Args:
        scheme (str): Esquema evaluado
        reference (ReferenceSpec): Referencia (autorreferencia por defecto)
        entry (ModelRegistryEntry): Modelo
        observable (Observable): φ
        dt_grid, eps_grid (Sequence[float]): Mallas
        samples (int): M por celda
        seed (int): Semilla común a todas las celdas
        final_time (float): T
        theta, theta2 (float): Parámetros del método theta
        threads (int, optional): Hilos de trabajo

    Returns:
        WeakErrorTable: Una fila por celda

    Raises:
        ParameterError: Si M < 100 o T no es múltiplo de algún dt
    """
    if samples < MIN_TABLE_SAMPLES:
        raise ParameterError(f"Una tabla necesita al menos {MIN_TABLE_SAMPLES} muestras")
    if not dt_grid or not eps_grid:
        raise ConfigurationError("Las mallas dt y eps no pueden estar vacías", key="eps_grid")

    scheme = get_scheme(scheme).scheme_id.value
    ref_scheme, ref_dt = reference.resolve(scheme, dt_grid)
    ids = np.arange(samples)
    rows: List[Dict[str, Any]] = []

    def _final_values(name: str, dt: float, eps: float, refine: int = 1) -> np.ndarray:
        params = SchemeParams.from_final_time(dt, final_time, eps=eps, theta=theta, theta2=theta2)
        batch = SimulationService(name, entry, params).simulate_paths(
            seed, ids, threads=threads, refine=refine
        )
        return np.asarray(observable.eval(batch.final_x), dtype=np.float64)

    for eps in eps_grid:
        ref_values = _final_values(ref_scheme, ref_dt, eps)
        ref = reduce_samples(ref_values)
        for dt in dt_grid:
            refine = _refinement(dt, ref_dt)
            values = _final_values(scheme, dt, eps, refine or 1)
            est = reduce_samples(values)
            if refine is None:
                error = abs(est.mean - ref.mean)
                error_std = float(np.hypot(est.std_error, ref.std_error))
            else:
                paired = reduce_samples(values - ref_values)
                error, error_std = abs(paired.mean), paired.std_error
            rows.append({
                "dt": dt, "eps": eps, "scheme": scheme, "estimate": est.mean,
                "std_error": est.std_error, "error": error, "error_std": error_std,
                "samples": samples, "reference_scheme": ref_scheme,
            })
            progress(f"{scheme} dt={dt:.3g} eps={eps:.3g} error={error:.3e} ± {error_std:.1e}")
    return WeakErrorTable(rows, reference.describe(scheme, dt_grid))


def fit_order(table: Union[WeakErrorTable, pd.DataFrame], axis: str = "dt") -> OrderFit:
    """
    Ajuste por mínimos cuadrados de log2(error) contra log2(axis).

    Solo se usan filas con error > 3·error_std.

    Args:
        table: Tabla o DataFrame con columnas axis, error y error_std
        axis (str): Columna de la abscisa ("dt" o "eps")

    Returns:
        OrderFit: Pendiente, ordenada, r², filas usadas y excluidas

    Raises:
        InsufficientDataError: Si quedan menos de 3 filas utilizables
    """
    frame = table.frame if isinstance(table, WeakErrorTable) else table
    usable = (frame["error"] > 3.0 * frame["error_std"]) & (frame["error"] > 0)
    used = frame[usable]
    if len(used) < 3:
        raise InsufficientDataError(
            f"Solo {len(used)} filas con error > 3σ; se necesitan al menos 3"
        )
    log_x = np.log2(used[axis].to_numpy(dtype=np.float64))
    log_y = np.log2(used["error"].to_numpy(dtype=np.float64))
    slope, intercept = np.polyfit(log_x, log_y, 1)
    residual = log_y - (slope * log_x + intercept)
    ss_tot = float(np.sum((log_y - log_y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(residual ** 2)) / ss_tot
    return OrderFit(float(slope), float(intercept), r2, int(len(used)), int(len(frame) - len(used)))


def _fit_record(frame: pd.DataFrame) -> Dict[str, Any]:
    try:
        return fit_order(frame)._asdict()
    except InsufficientDataError as e:
        return {"error": str(e)}


def summarize(table: WeakErrorTable) -> Dict[str, Any]:
    """
    Resumen de una tabla: pendientes a ε fijo y pendiente del supremo sobre ε.
    Los ajustes que fallan se informan en lugar de lanzar la excepción.
    """
    eps_values = sorted(table.frame["eps"].unique(), reverse=True)
    fixed = [{"eps": float(eps), **_fit_record(table.at_eps(eps))} for eps in eps_values]
    excluded = table.frame[~(table.frame["error"] > 3.0 * table.frame["error_std"])]
    return {
        "reference": table.reference,
        "fixed_eps": fixed,
        "sup_eps": _fit_record(table.sup_over_eps()) if len(eps_values) > 1 else None,
        "excluded_cells": excluded[["dt", "eps"]].to_dict(orient="records"),
    }


def _displacement(x: np.ndarray, y: np.ndarray, domain: Domain) -> np.ndarray:
    delta = x - y
    if Domain(domain) is Domain.TORUS:
        # representante de mínima norma en el toro
        delta = delta - np.round(delta)
    return delta


def coupled_limit_gap(scheme: Union[str, SchemeId], limit_scheme: Optional[Union[str, SchemeId]],
                      entry: ModelRegistryEntry, params: SchemeParams, eps_list: Sequence[float],
                      samples: int, seed: int = 0,
                      threads: Optional[int] = None) -> List[GapRow]:
    """
    Distancia media |X_N^ε - X_N| entre un esquema y su límite con ruido común.

    Args:
        scheme (str): Esquema con variable rápida
        limit_scheme (str, optional): Esquema límite; None = el registrado para scheme
        entry (ModelRegistryEntry): Modelo
        params (SchemeParams): Parámetros (se ignora su ε)
        eps_list (Sequence[float]): Valores de ε
        samples (int): Trayectorias por ε
        seed (int): Semilla común

    Returns:
        List[GapRow]: (eps, gap, gap_std) por cada ε

    Raises:
        ConfigurationError: Si el esquema no tiene límite registrado
    """
    spec = get_scheme(scheme)
    if limit_scheme is None:
        if spec.limit is None:
            raise ConfigurationError(
                f"El esquema '{spec.scheme_id.value}' no tiene esquema límite", key="scheme"
            )
        limit_scheme = spec.limit
    ids = np.arange(samples)
    limit_x = SimulationService(limit_scheme, entry, params).simulate_paths(seed, ids, threads=threads).final_x

    rows = []
    for eps in eps_list:
        service = SimulationService(spec.scheme_id, entry, params.with_eps(eps))
        final_x = service.simulate_paths(seed, ids, threads=threads).final_x
        distance = np.linalg.norm(_displacement(final_x, limit_x, entry.model.domain), axis=-1)
        est = reduce_samples(distance)
        rows.append(GapRow(float(eps), est.mean, est.std_error))
        progress(f"{spec.scheme_id.value} eps={eps:.3g} gap={est.mean:.3e}")
    return rows


def one_step_mean_drift(scheme: Union[str, SchemeId], entry: ModelRegistryEntry,
                        params: SchemeParams, x: Sequence[float], m: float, samples: int,
                        seed: int = 0, threads: Optional[int] = None) -> Estimate:
    """
    Estima (E[X_1] - x) / Δt de la primera componente tras un paso desde (x, m).
    """
    one_step = SchemeParams(**{**params.model_dump(), "N": 1})
    service = SimulationService(scheme, entry, one_step, x0=x, m0=m)
    batch = service.simulate_paths(seed, np.arange(samples), threads=threads)
    start = np.asarray(x, dtype=np.float64)[0]
    return reduce_samples((batch.final_x[:, 0] - start) / params.dt)


def path_mean_band(scheme: Union[str, SchemeId], entry: ModelRegistryEntry,
                   params: SchemeParams, samples: int, seed: int = 0, every: int = 1,
                   threads: Optional[int] = None) -> pd.DataFrame:
    """
    Media y error estándar de la primera componente de X_n en cada instante registrado.

    Returns:
        pd.DataFrame: Columnas t, mean, std_error
    """
    service = SimulationService(scheme, entry, params)
    batch = service.simulate_paths(seed, np.arange(samples), record=True, every=every, threads=threads)
    values = batch.x[:, :, 0]
    stats = [reduce_samples(values[:, k]) for k in range(values.shape[1])]
    return pd.DataFrame({
        "t": batch.times,
        "mean": [s.mean for s in stats],
        "std_error": [s.std_error for s in stats],
    })
