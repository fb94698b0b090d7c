"""
Subcomando limit-gap: distancia acoplada entre un esquema y su esquema límite.
"""

import pandas as pd

from settings import resolve_threads
from ..models.config import Command
from ..models.registry import get_model
from ..services.montecarlo import coupled_limit_gap
from ..utils.console import info
from ..utils.csv_handler import CSVHandler
from ..utils.errors import ConfigurationError
from .options import (
    ConfigOpt, DtGridOpt, DtOpt, EpsGridOpt, EpsOpt, EveryOpt, FinalTimeOpt, ModelOpt,
    ObservableOpt, OutputOpt, PresetOpt, SamplesOpt, SchemeOpt, SeedOpt, Theta2Opt, ThetaOpt,
    exit_codes, load_config,
)


@exit_codes
def run_limit_gap(
    config_path: ConfigOpt = None,
    model: ModelOpt = None,
    scheme: SchemeOpt = None,
    dt: DtOpt = None,
    dt_grid: DtGridOpt = None,
    eps: EpsOpt = None,
    eps_grid: EpsGridOpt = None,
    theta: ThetaOpt = None,
    theta2: Theta2Opt = None,
    T: FinalTimeOpt = None,
    samples: SamplesOpt = None,
    seed: SeedOpt = None,
    observable: ObservableOpt = None,
    output: OutputOpt = None,
    every: EveryOpt = None,
    preset: PresetOpt = None,
):
    """
    Calcula E|X_N^ε - X_N| para cada ε de --eps-grid (o --eps) con ruido común.
    El segundo esquema de --scheme, si se da, sustituye al límite registrado.
    """
    config = load_config(Command.LIMIT_GAP, config_path, dict(
        model=model, scheme=scheme, dt=dt, dt_grid=dt_grid, eps=eps, eps_grid=eps_grid,
        theta=theta, theta2=theta2, T=T, samples=samples, seed=seed, observable=observable,
        output=output, every=every, preset=preset,
    ))
    config.require("model", "dt")
    eps_values = list(config.eps_grid) if config.eps_grid else ([config.eps] if config.eps else [])
    if not eps_values:
        raise ConfigurationError("limit-gap necesita --eps-grid o --eps", key="eps-grid")

    entry = get_model(config.model)
    params = config.scheme_params(eps=eps_values[0])
    rows = coupled_limit_gap(config.primary_scheme, config.secondary_scheme, entry, params,
                             eps_values, config.samples, config.seed, threads=resolve_threads())
    frame = pd.DataFrame(rows, columns=["eps", "gap", "gap_std"])
    CSVHandler.write_csv(frame, config.output)
    info(f"Distancias al esquema límite ({len(frame)} valores de ε) guardadas en {config.output}")
