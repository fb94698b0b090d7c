"""
Servicio de simulación de trayectorias.
Itera un esquema N pasos con ruido tomado de flujos reproducibles por trayectoria.

Las trayectorias se agrupan en bloques de tamaño fijo (CHUNK_SIZE) que se
ejecutan en un ThreadPoolExecutor; cada trayectoria depende solo de
(seed, trajectory_id), así que el resultado no cambia con el número de hilos.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from settings import CHUNK_SIZE, NOISE_PAGE, resolve_threads
from ..models.registry import ModelRegistryEntry
from ..models.state import SchemeParams, SystemState
from ..utils.errors import InvalidStateError, NumericalFailureError
from ..utils.rng import GaussianStream, aggregate_steps
from .schemes import SchemeId, SchemeSpec, get_scheme


class PathBatch(BaseModel):
    """
    Resultado de simular un lote de trayectorias.

    Attributes:
        times (np.ndarray): Instantes registrados, forma (K,)
        x (np.ndarray): Componente lenta, forma (B, K, d)
        m (np.ndarray): Componente rápida, forma (B, K); NaN en esquemas límite
        trajectory_ids (np.ndarray): Identificadores en orden ascendente de entrada
        diverged_at (np.ndarray): Primer paso con valores no finitos (-1 si ninguno)
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    times: np.ndarray
    x: np.ndarray
    m: np.ndarray
    trajectory_ids: np.ndarray
    diverged_at: np.ndarray

    @property
    def final_x(self) -> np.ndarray:
        return self.x[:, -1, :]

    @property
    def final_m(self) -> np.ndarray:
        return self.m[:, -1]


class SimulationService:
    """
    Ejecuta un esquema sobre un modelo del registro.

    Verifica la compatibilidad esquema/modelo al construirse y fija el
    estado inicial (el del registro salvo que se indique otro).
    """

    def __init__(self, scheme_id: Union[str, SchemeId], entry: ModelRegistryEntry,
                 params: SchemeParams, x0: Optional[Sequence[float]] = None,
                 m0: Optional[float] = None):
        """
        Inicializa el servicio.

        Args:
            scheme_id (str): Identificador del esquema
            entry (ModelRegistryEntry): Modelo y condición inicial
            params (SchemeParams): Δt, ε, θ, θ' y N
            x0 (Sequence[float], optional): Estado lento inicial alternativo
            m0 (float, optional): Estado rápido inicial alternativo

        Raises:
            ConfigurationError: Si el esquema no es compatible con el modelo
        """
        self.scheme: SchemeSpec = get_scheme(scheme_id)
        self.scheme.check_model(entry.model)
        self.entry = entry
        self.model = entry.model
        self.params = params
        self.x0 = np.asarray(entry.x0 if x0 is None else x0, dtype=np.float64)
        self.m0 = float(entry.m0 if m0 is None else m0)
        self.noise_dim = self.model.noise_dim

    def _initial(self, batch: int):
        x = np.broadcast_to(self.x0, (batch, self.x0.shape[-1])).copy()
        m = np.full(batch, self.m0 if self.scheme.evolves_fast else np.nan)
        return x, m

    def fine_params(self, refine: int) -> SchemeParams:
        """Parámetros del paso fino: dt / refine y N * refine."""
        return SchemeParams(**{**self.params.model_dump(), "dt": self.params.dt / refine,
                               "N": self.params.N * refine})

    def record_steps(self, every: int = 1) -> np.ndarray:
        """Índices n registrados: múltiplos de every y siempre el último."""
        n_steps = self.params.N
        steps = np.arange(0, n_steps + 1, max(int(every), 1))
        if steps[-1] != n_steps:
            steps = np.append(steps, n_steps)
        return steps

    def run_chunk(self, seed: int, trajectory_ids: np.ndarray, record: bool = False,
                  every: int = 1, refine: int = 1):
        """
        Simula un bloque de trayectorias de forma vectorizada.

        Una trayectoria que deja de ser finita en un paso queda marcada y su
        estado pasa a NaN hasta el final, aunque el núcleo devuelva valores finitos.

        Args:
            seed (int): Semilla global
            trajectory_ids (np.ndarray): Identificadores del bloque
            record (bool): Si se registra la trayectoria completa
            every (int): Submuestreo del registro
            refine (int): Pasos finos de ruido agrupados en cada paso (1 = flujo propio)

        Returns:
            Tuple[np.ndarray, np.ndarray, np.ndarray]: x con forma (B, K, d),
            m con forma (B, K) y el primer paso no finito de cada trayectoria (-1 si ninguno)
        """
        batch = len(trajectory_ids)
        streams = [GaussianStream(seed, int(tid)) for tid in trajectory_ids]
        x, m = self._initial(batch)
        kernel = self.scheme.kernel
        weights = self.scheme.fast_weights(self.fine_params(refine), refine) if refine > 1 else None
        steps = self.record_steps(every) if record else np.array([self.params.N])
        xs = np.empty((batch, len(steps), x.shape[-1]))
        ms = np.empty((batch, len(steps)))
        diverged_at = np.full(batch, -1, dtype=np.int64)
        slot = 0
        if steps[0] == 0:
            xs[:, 0], ms[:, 0] = x, m
            slot = 1

        n = 0
        with np.errstate(over="ignore", invalid="ignore"):
            while n < self.params.N:
                page = min(max(NOISE_PAGE // refine, 1), self.params.N - n)
                draws = [stream.take_steps(page * refine, self.noise_dim) for stream in streams]
                gammas = np.stack([d[0] for d in draws])
                Gammas = np.stack([d[1] for d in draws])
                if weights is not None:
                    gammas, Gammas = aggregate_steps(gammas, Gammas, weights)
                for k in range(page):
                    x, m, _ = kernel(x, m, gammas[:, k], Gammas[:, k], self.params, self.model)
                    n += 1
                    finite = np.isfinite(x).all(axis=-1)
                    if self.scheme.evolves_fast:
                        finite &= np.isfinite(m)
                    fresh = ~finite & (diverged_at < 0)
                    if fresh.any():
                        diverged_at[fresh] = n
                    lost = diverged_at >= 0
                    if lost.any():
                        x = np.where(lost[:, None], np.nan, x)
                        m = np.where(lost, np.nan, m)
                    if slot < len(steps) and steps[slot] == n:
                        xs[:, slot], ms[:, slot] = x, m
                        slot += 1
        return xs, ms, diverged_at

    def simulate_paths(self, seed: int, trajectory_ids: Sequence[int], record: bool = False,
                       every: int = 1, threads: Optional[int] = None, refine: int = 1) -> PathBatch:
        """
        Simula un conjunto de trayectorias en bloques de tamaño fijo.

        Args:
            seed (int): Semilla global
            trajectory_ids (Sequence[int]): Identificadores de trayectoria
            record (bool): Si se registran todos los pasos (o cada every) o solo el final
            every (int): Submuestreo del registro
            threads (int, optional): Hilos de trabajo; None usa APSDE_THREADS
            refine (int): Pasos finos de ruido por paso; el ruido de cada paso es el
                agregado de refine pasos del flujo, como si se integrara con dt / refine

        Returns:
            PathBatch: Estados registrados de cada trayectoria
        """
        ids = np.asarray(trajectory_ids, dtype=np.uint64)
        chunks = [ids[i:i + CHUNK_SIZE] for i in range(0, len(ids), CHUNK_SIZE)]
        workers = min(resolve_threads(threads), max(len(chunks), 1))
        if workers == 1:
            results = [self.run_chunk(seed, chunk, record, every, refine) for chunk in chunks]
        else:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                results = list(executor.map(
                    lambda c: self.run_chunk(seed, c, record, every, refine), chunks
                ))

        steps = self.record_steps(every) if record else np.array([self.params.N])
        dim = self.x0.shape[-1]
        x = np.concatenate([r[0] for r in results]) if results else np.empty((0, len(steps), dim))
        m = np.concatenate([r[1] for r in results]) if results else np.empty((0, len(steps)))
        diverged = np.concatenate([r[2] for r in results]) if results else np.empty(0, dtype=np.int64)
        return PathBatch(times=steps * self.params.dt, x=x, m=m, trajectory_ids=ids, diverged_at=diverged)

    def simulate_trajectory(self, stream: GaussianStream) -> List[SystemState]:
        """
        Simula una trayectoria registrando todos los estados.

        Args:
            stream (GaussianStream): Flujo de ruido de la trayectoria

        Returns:
            List[SystemState]: N + 1 estados desde t = 0

        Raises:
            NumericalFailureError: Si algún paso produce valores no finitos
        """
        x, m = self._initial(1)
        x, m = x[0], m[0]
        kernel = self.scheme.kernel
        states = [SystemState(x=x, m=m)]
        n = 0
        while n < self.params.N:
            page = min(NOISE_PAGE, self.params.N - n)
            gammas, Gammas = stream.take_steps(page, self.noise_dim)
            for k in range(page):
                x, m, _ = kernel(x, m, gammas[k], Gammas[k], self.params, self.model)
                n += 1
                state = SystemState(x=x, m=m)
                try:
                    state.ensure_finite(check_m=self.scheme.evolves_fast)
                except InvalidStateError as e:
                    raise NumericalFailureError(1, 1, step=n) from e
                states.append(state)
        return states


def simulate_trajectory(scheme_id: Union[str, SchemeId], entry: ModelRegistryEntry,
                        params: SchemeParams, stream: GaussianStream,
                        x0: Optional[Sequence[float]] = None,
                        m0: Optional[float] = None) -> List[SystemState]:
    """
    Itera el esquema N veces desde la condición inicial del registro.

    Args:
        scheme_id (str): Identificador del esquema
        entry (ModelRegistryEntry): Modelo del registro
        params (SchemeParams): Parámetros del esquema
        stream (GaussianStream): Flujo de ruido
        x0, m0: Condición inicial alternativa

    Returns:
        List[SystemState]: Secuencia de longitud N + 1

    Raises:
        ConfigurationError: Si el esquema no es compatible con el modelo
        NumericalFailureError: Si algún paso produce valores no finitos
    """
    return SimulationService(scheme_id, entry, params, x0, m0).simulate_trajectory(stream)


def simulate_paths(scheme_id: Union[str, SchemeId], entry: ModelRegistryEntry,
                   params: SchemeParams, seed: int, trajectory_ids: Sequence[int],
                   record: bool = False, every: int = 1,
                   x0: Optional[Sequence[float]] = None, m0: Optional[float] = None,
                   threads: Optional[int] = None, refine: int = 1) -> PathBatch:
    """Versión por lotes de simulate_trajectory (mismos sorteos por trajectory_id)."""
    service = SimulationService(scheme_id, entry, params, x0, m0)
    return service.simulate_paths(seed, trajectory_ids, record=record, every=every, threads=threads,
                                  refine=refine)
