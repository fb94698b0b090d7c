"""
Subcomandos weak-error y sweep: tablas de error débil y resumen de órdenes.
"""

from typing import List

from settings import resolve_threads
from ..models.config import Command, RunConfig
from ..models.registry import get_model
from ..services.montecarlo import (
    ReferenceSpec,
    WeakErrorTable,
    get_observable,
    summarize,
    weak_error_table,
)
from ..utils.console import info, warning
from ..utils.csv_handler import CSVHandler
from ..utils.errors import ConfigurationError
from .options import (
    ConfigOpt, DtGridOpt, DtOpt, EpsGridOpt, EpsOpt, EveryOpt, FinalTimeOpt, ModelOpt,
    ObservableOpt, OutputOpt, PresetOpt, SamplesOpt, SchemeOpt, SeedOpt, Theta2Opt, ThetaOpt,
    exit_codes, load_config,
)


def _table(config: RunConfig, eps_values: List[float]) -> WeakErrorTable:
    config.require("model")
    entry = get_model(config.model)
    return weak_error_table(
        config.primary_scheme,
        ReferenceSpec(scheme=config.secondary_scheme),
        entry,
        get_observable(config.observable),
        config.dt_grid,
        eps_values,
        config.samples,
        seed=config.seed,
        final_time=config.T,
        theta=config.theta,
        theta2=config.theta2,
        threads=resolve_threads(),
    )


def write_table(config: RunConfig, table: WeakErrorTable) -> None:
    """Escribe el CSV de la tabla y el resumen JSON junto a él."""
    CSVHandler.write_csv(table.to_csv_frame(), config.output)
    summary = summarize(table)
    summary.update({
        "scheme": config.primary_scheme,
        "model": config.model,
        "observable": config.observable,
        "samples": config.samples,
        "seed": config.seed,
    })
    CSVHandler.write_json(summary, f"{config.output}.summary.json")
    for row in summary["fixed_eps"]:
        if "slope" in row:
            info(f"eps={row['eps']:.3g}: pendiente {row['slope']:.3f} (r²={row['r2']:.3f})")
        else:
            warning(f"eps={row['eps']:.3g}: {row['error']}")
    info(f"Tabla con {len(table)} celdas guardada en {config.output}")


@exit_codes
def run_weak_error(
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
    Error débil a ε fijo (--eps, o cada valor de --eps-grid) sobre --dt-grid.
    """
    config = load_config(Command.WEAK_ERROR, config_path, dict(
        model=model, scheme=scheme, dt=dt, dt_grid=dt_grid, eps=eps, eps_grid=eps_grid,
        theta=theta, theta2=theta2, T=T, samples=samples, seed=seed, observable=observable,
        output=output, every=every, preset=preset,
    ))
    if config.eps is not None:
        eps_values = [config.eps]
    elif config.eps_grid:
        eps_values = list(config.eps_grid)
    else:
        raise ConfigurationError("weak-error necesita --eps o --eps-grid", key="eps")
    config.require("dt_grid")
    write_table(config, _table(config, eps_values))


@exit_codes
def run_sweep(
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
    Tabla completa dt_grid x eps_grid; exige una malla de ε no vacía.
    """
    config = load_config(Command.SWEEP, config_path, dict(
        model=model, scheme=scheme, dt=dt, dt_grid=dt_grid, eps=eps, eps_grid=eps_grid,
        theta=theta, theta2=theta2, T=T, samples=samples, seed=seed, observable=observable,
        output=output, every=every, preset=preset,
    ))
    config.require("dt_grid", "eps_grid")
    write_table(config, _table(config, list(config.eps_grid)))
