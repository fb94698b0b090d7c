"""
Opciones compartidas por los subcomandos y traducción de errores a códigos de salida.
"""

from functools import wraps
from typing import Any, Callable, Dict, Optional

import typer
from typing_extensions import Annotated

from ..models.config import Command, RunConfig
from ..utils.console import error
from ..utils.errors import NumericalFailureError

EXIT_CONFIGURATION = 2
EXIT_NUMERICAL = 3

ConfigOpt = Annotated[Optional[str], typer.Option("--config", help="Archivo JSON con la configuración")]
ModelOpt = Annotated[Optional[str], typer.Option("--model", help="Modelo del registro")]
SchemeOpt = Annotated[Optional[str], typer.Option("--scheme", help="Esquema(s) separados por comas")]
DtOpt = Annotated[Optional[float], typer.Option("--dt", help="Paso de tiempo")]
DtGridOpt = Annotated[Optional[str], typer.Option("--dt-grid", help="Malla de pasos, p. ej. 0.0625,0.03125")]
EpsOpt = Annotated[Optional[float], typer.Option("--eps", help="Parámetro de escala ε")]
EpsGridOpt = Annotated[Optional[str], typer.Option("--eps-grid", help="Malla de ε separada por comas")]
ThetaOpt = Annotated[Optional[float], typer.Option("--theta", help="θ del método theta")]
Theta2Opt = Annotated[Optional[float], typer.Option("--theta2", help="θ′ de la parte rápida")]
FinalTimeOpt = Annotated[Optional[float], typer.Option("--T", help="Tiempo final")]
SamplesOpt = Annotated[Optional[int], typer.Option("--samples", help="Número de trayectorias")]
SeedOpt = Annotated[Optional[int], typer.Option("--seed", help="Semilla global")]
ObservableOpt = Annotated[Optional[str], typer.Option("--observable", help="identity, sin2pix o cos2pix")]
OutputOpt = Annotated[Optional[str], typer.Option("--output", help="Ruta del CSV de salida")]
EveryOpt = Annotated[Optional[int], typer.Option("--every", help="Registrar uno de cada k pasos")]
PresetOpt = Annotated[Optional[str], typer.Option("--preset", help="fig-av1, fig-diff1, fig-diff1x o fig-diff2")]


def load_config(command: Command, config_path: Optional[str], flags: Dict[str, Any]) -> RunConfig:
    """Construye la RunConfig de un subcomando a partir del archivo y las opciones."""
    return RunConfig.load(command, config_path, flags)


def exit_codes(fn: Callable[..., None]) -> Callable[..., None]:
    """
    Convierte los errores del dominio en códigos de salida:
    2 para configuración inválida y 3 para fallo numérico.
    """

    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NumericalFailureError as e:
            error(f"Fallo numérico: {e}")
            raise typer.Exit(code=EXIT_NUMERICAL)
        except ValueError as e:
            error(f"Configuración inválida: {e}")
            raise typer.Exit(code=EXIT_CONFIGURATION)

    return wrapper
