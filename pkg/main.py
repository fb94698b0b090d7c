import typer

from src.routers import generator_gap, limit_gap, sweep, trajectory

# Crear la aplicación de línea de comandos
app = typer.Typer(
    help="Integradores AP para EDEs lento-rápidas: trayectorias, errores débiles y diagnósticos",
    no_args_is_help=True,
    add_completion=False,
)
app.command("trajectory")(trajectory.run_trajectory)
app.command("weak-error")(sweep.run_weak_error)
app.command("sweep")(sweep.run_sweep)
app.command("limit-gap")(limit_gap.run_limit_gap)
app.command("generator-gap")(generator_gap.run_generator_gap)


if __name__ == "__main__":
    app()
