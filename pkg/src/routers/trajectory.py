"""
Subcomando trajectory: una trayectoria por esquema, o las de un preset de figura.
"""

from typing import List, Tuple

import pandas as pd

from ..models.config import Command, RunConfig, get_preset
from ..models.registry import ModelRegistryEntry, get_model
from ..models.state import SchemeParams
from ..services.montecarlo import path_mean_band
from ..services.simulation import simulate_paths
from ..utils.console import info
from ..utils.csv_handler import CSVHandler
from ..utils.errors import NumericalFailureError
from .options import (
    ConfigOpt, DtGridOpt, DtOpt, EpsGridOpt, EpsOpt, EveryOpt, FinalTimeOpt, ModelOpt,
    ObservableOpt, OutputOpt, PresetOpt, SamplesOpt, SchemeOpt, SeedOpt, Theta2Opt, ThetaOpt,
    exit_codes, load_config,
)


def trajectory_frame(scheme: str, entry: ModelRegistryEntry, params: SchemeParams,
                     seed: int, every: int = 1) -> pd.DataFrame:
    """
    Trayectoria 0 del flujo (seed, 0) como DataFrame con columnas t, x_0..x_{d-1}, m.

    Raises:
        NumericalFailureError: Si la trayectoria deja de ser finita
    """
    batch = simulate_paths(scheme, entry, params, seed, [0], record=True, every=every)
    if batch.diverged_at[0] >= 0:
        raise NumericalFailureError(1, 1, step=int(batch.diverged_at[0]))
    frame = pd.DataFrame({"t": batch.times})
    for i in range(batch.x.shape[-1]):
        frame[f"x_{i}"] = batch.x[0, :, i]
    frame["m"] = batch.m[0]
    return frame


def _write_band(config: RunConfig, runs: List[Tuple[str, str, SchemeParams]],
                entry: ModelRegistryEntry) -> None:
    frames = []
    for label, scheme, params in runs:
        band = path_mean_band(scheme, entry, params, config.samples, config.seed, config.every)
        band.insert(1, "scheme", label)
        frames.append(band)
    path = CSVHandler.sibling_path(config.output, "mean")
    CSVHandler.write_csv(pd.concat(frames, ignore_index=True), path)
    info(f"Banda de medias guardada en {path}")


def _run_preset(config: RunConfig) -> None:
    preset = get_preset(config.preset)
    entry = get_model(config.model or preset.model)
    dt = config.dt if "dt" in config.model_fields_set else preset.dt
    eps = config.eps if "eps" in config.model_fields_set else preset.eps
    T = config.T if "T" in config.model_fields_set else preset.T
    runs = []
    for run in preset.runs:
        params = SchemeParams.from_final_time(
            dt, T, eps=eps, theta=config.theta,
            theta2=run.theta2 if run.theta2 is not None else config.theta2,
        )
        frame = trajectory_frame(run.scheme, entry, params, config.seed, config.every)
        path = CSVHandler.sibling_path(config.output, run.label)
        CSVHandler.write_csv(frame, path)
        info(f"{preset.name} / {run.label}: {len(frame)} filas en {path}")
        runs.append((run.label, run.scheme, params))
    if "samples" in config.model_fields_set and config.samples > 1:
        _write_band(config, runs, entry)


@exit_codes
def run_trajectory(
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
    Simula una trayectoria y la guarda en CSV (t, x_0.., m).
    """
    flags = dict(model=model, scheme=scheme, dt=dt, dt_grid=dt_grid, eps=eps, eps_grid=eps_grid,
                 theta=theta, theta2=theta2, T=T, samples=samples, seed=seed,
                 observable=observable, output=output, every=every, preset=preset)
    config = load_config(Command.TRAJECTORY, config_path, flags)
    if config.preset:
        _run_preset(config)
        return

    config.require("model")
    entry = get_model(config.model)
    params = config.scheme_params()
    frame = trajectory_frame(config.primary_scheme, entry, params, config.seed, config.every)
    CSVHandler.write_csv(frame, config.output)
    info(f"Trayectoria {config.primary_scheme} ({len(frame)} filas) guardada en {config.output}")
    if "samples" in config.model_fields_set and config.samples > 1:
        _write_band(config, [(config.primary_scheme, config.primary_scheme, params)], entry)

