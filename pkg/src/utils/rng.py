"""
Flujos reproducibles de variables gaussianas.

Cada trayectoria tiene su propio flujo, identificado por (seed, trajectory_id).
El k-ésimo valor es una función pura de (seed, trajectory_id, k): se usa el
generador Philox de numpy, que es de tipo contador, con clave de 128 bits
(seed en la mitad alta, trajectory_id en la baja).

Contrato de consumo por paso: primero gamma (escalar), luego las D
componentes de Gamma en orden de índice. Todos los esquemas consumen
1 + D valores por paso aunque no los usen.
"""

from typing import Tuple

import numpy as np
from scipy.special import ndtri

_MASK_64 = (1 << 64) - 1
_SHIFT = np.uint64(11)
_SCALE = 2.0 ** -53


def _words_to_normals(words: np.ndarray) -> np.ndarray:
    # 53 bits altos -> uniforme en (0, 1) abierto -> normal por CDF inversa
    uniforms = ((words >> _SHIFT).astype(np.float64) + 0.5) * _SCALE
    return ndtri(uniforms)


class GaussianStream:
    """
    Flujo de normales estándar de una trayectoria.

    Attributes:
        seed (int): Semilla global del experimento (64 bits)
        trajectory_id (int): Identificador de la trayectoria (64 bits)
        counter (int): Número de escalares ya consumidos
    """

    __slots__ = ("seed", "trajectory_id", "counter", "_bitgen")

    def __init__(self, seed: int = 0, trajectory_id: int = 0):
        if not (0 <= seed <= _MASK_64 and 0 <= trajectory_id <= _MASK_64):
            raise ValueError("seed y trajectory_id deben ser enteros de 64 bits sin signo")
        self.seed = int(seed)
        self.trajectory_id = int(trajectory_id)
        self.counter = 0
        self._bitgen = np.random.Philox(key=(self.seed << 64) | self.trajectory_id)

    def take(self, n: int) -> np.ndarray:
        """
        Devuelve los siguientes n valores normales del flujo.

        Args:
            n (int): Número de escalares a consumir

        Returns:
            np.ndarray: Vector de n normales estándar
        """
        if n < 0:
            raise ValueError("n debe ser no negativo")
        words = self._bitgen.random_raw(n)
        self.counter += n
        return _words_to_normals(np.asarray(words, dtype=np.uint64).reshape(n))

    def next_gaussian(self) -> float:
        """Devuelve el siguiente escalar gamma_n."""
        return float(self.take(1)[0])

    def next_gaussian_vec(self, dim: int) -> np.ndarray:
        """Devuelve el siguiente vector Gamma_n de dimensión dim."""
        return self.take(dim)

    def take_steps(self, n_steps: int, noise_dim: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Consume el ruido de n_steps pasos completos.

        Args:
            n_steps (int): Número de pasos
            noise_dim (int): Dimensión D del vector Gamma

        Returns:
            Tuple[np.ndarray, np.ndarray]: gamma con forma (n_steps,) y
            Gamma con forma (n_steps, noise_dim)
        """
        block = self.take(n_steps * (1 + noise_dim)).reshape(n_steps, 1 + noise_dim)
        return block[:, 0], block[:, 1:]

    @staticmethod
    def draw_at(seed: int, trajectory_id: int, k: int) -> float:
        """
        Valor k-ésimo del flujo (seed, trajectory_id), sin estado.

        Args:
            seed (int): Semilla global
            trajectory_id (int): Identificador de trayectoria
            k (int): Índice del valor (desde 0)

        Returns:
            float: Normal estándar
        """
        return float(GaussianStream(seed, trajectory_id).take(k + 1)[k])

    def __repr__(self) -> str:
        return (
            f"GaussianStream(seed={self.seed}, trajectory_id={self.trajectory_id}, "
            f"counter={self.counter})"
        )


def aggregate_steps(gammas: np.ndarray, Gammas: np.ndarray,
                    fast_weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Agrupa el ruido de K pasos finos consecutivos en el de un paso grueso.

    Gamma grueso es la suma normalizada de los K incrementos brownianos;
    gamma grueso es la combinación con pesos fast_weights, normalizada para
    que siga siendo N(0, 1). Con los pesos del Ornstein-Uhlenbeck exacto
    (w_j = e^{-(K-1-j)r}) la variable rápida gruesa coincide con la fina en
    los instantes comunes.

    Args:
        gammas (np.ndarray): Forma (B, n*K)
        Gammas (np.ndarray): Forma (B, n*K, D)
        fast_weights (np.ndarray): Pesos de los K valores de gamma, forma (K,)

    Returns:
        Tuple[np.ndarray, np.ndarray]: gamma con forma (B, n) y Gamma con forma (B, n, D)
    """
    weights = np.asarray(fast_weights, dtype=np.float64)
    refine = weights.shape[0]
    batch, fine_steps = gammas.shape
    if fine_steps % refine:
        raise ValueError(f"{fine_steps} pasos finos no se agrupan en bloques de {refine}")
    coarse = fine_steps // refine
    gamma = gammas.reshape(batch, coarse, refine) @ (weights / np.linalg.norm(weights))
    Gamma = Gammas.reshape(batch, coarse, refine, -1).sum(axis=2) / np.sqrt(refine)
    return gamma, Gamma
