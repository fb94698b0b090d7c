"""
Subcomando generator-gap: |L^ε φ^ε - Lφ| normalizado, régimen de difusión.
"""

from ..analysis.generators import generator_gap
from ..analysis.test_functions import get_test_function
from ..models.config import Command
from ..models.registry import get_model
from ..utils.console import info
from ..utils.csv_handler import CSVHandler
from ..utils.errors import ConfigurationError
from .options import (
    ConfigOpt, DtGridOpt, DtOpt, EpsGridOpt, EpsOpt, EveryOpt, FinalTimeOpt, ModelOpt,
    ObservableOpt, OutputOpt, PresetOpt, SamplesOpt, SchemeOpt, SeedOpt, Theta2Opt, ThetaOpt,
    exit_codes, load_config,
)


@exit_codes
def run_generator_gap(
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
    Máximo del residuo normalizado del generador sobre una malla 64 x 13 de (x, m).
    """
    config = load_config(Command.GENERATOR_GAP, config_path, dict(
        model=model, scheme=scheme, dt=dt, dt_grid=dt_grid, eps=eps, eps_grid=eps_grid,
        theta=theta, theta2=theta2, T=T, samples=samples, seed=seed, observable=observable,
        output=output, every=every, preset=preset,
    ))
    config.require("model")
    entry = get_model(config.model)
    if entry.family != "diffusion":
        raise ConfigurationError("generator-gap solo está disponible en régimen de difusión", key="model")
    eps_values = list(config.eps_grid) if config.eps_grid else ([config.eps] if config.eps else [])
    if not eps_values:
        raise ConfigurationError("generator-gap necesita --eps-grid o --eps", key="eps-grid")

    frame = generator_gap(entry.model, get_test_function(config.observable), eps_values)
    CSVHandler.write_csv(frame, config.output)
    info(f"Residuo del generador para {len(frame)} valores de ε guardado en {config.output}")
