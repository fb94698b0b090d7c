"""
Salida de mensajes para el usuario.
Los mensajes van a stderr para que stdout y los archivos CSV queden limpios.
"""

from rich.console import Console

console = Console(stderr=True, highlight=False)


def info(message: str) -> None:
    console.print(f"✅ {message}", markup=False)


def warning(message: str) -> None:
    console.print(f"⚠️ {message}", style="yellow", markup=False)


def error(message: str) -> None:
    console.print(f"❌ {message}", style="bold red", markup=False)


def progress(message: str) -> None:
    console.print(f"🎲 {message}", style="dim", markup=False)
