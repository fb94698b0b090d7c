import os
from dotenv import load_dotenv

load_dotenv()

# Configuración de ejecución
# 0 = usar todos los núcleos disponibles
APSDE_THREADS = int(os.getenv("APSDE_THREADS", "0"))

# Trayectorias por unidad de trabajo; fijo para que el resultado no dependa
# del número de hilos
CHUNK_SIZE = int(os.getenv("APSDE_CHUNK_SIZE", "1024"))
# Pasos de ruido generados por bloque dentro de una unidad de trabajo
NOISE_PAGE = 512

# Valores por defecto de los experimentos
DEFAULT_DT_GRID = [2.0 ** -k for k in range(4, 11)]
DEFAULT_EPS_GRID = [2.0 ** -k for k in range(0, 11)]
DEFAULT_SAMPLES = 100_000
DEFAULT_FINAL_TIME = 1.0
DEFAULT_QUADRATURE_ORDER = 32
REFERENCE_DT_DIVISOR = 16

# Tolerancia de trayectorias no finitas antes de declarar fallo numérico
MAX_NON_FINITE_RATE = 1e-3


def resolve_threads(requested: int | None = None) -> int:
    """
    Determina el número de hilos de trabajo.

    Args:
        requested (int, optional): Valor explícito; None usa APSDE_THREADS

    Returns:
        int: Número de hilos (al menos 1)
    """
    threads = APSDE_THREADS if requested is None else requested
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads
