"""
Manejador de archivos CSV y JSON de resultados.
Escribe los productos de datos de forma atómica: archivo temporal en el
directorio destino y luego os.replace.
"""

import json
import os
import tempfile
from typing import Any, Dict

import pandas as pd

FLOAT_FORMAT = "%.17g"


class CSVHandler:
    """
    Clase para manejar operaciones con archivos CSV.

    Todos los archivos se escriben en UTF-8 con fin de línea LF y
    flotantes con 17 cifras significativas.
    """

    @staticmethod
    def _atomic_write(file_path: str, writer) -> None:
        directory = os.path.dirname(os.path.abspath(file_path))
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                writer(handle)
            os.replace(tmp_path, file_path)
        except Exception as e:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise IOError(f"Error al escribir el archivo {file_path}: {str(e)}")

    @staticmethod
    def write_csv(data: pd.DataFrame, file_path: str, index: bool = False) -> None:
        """
        Escribe un DataFrame a un archivo CSV de forma atómica.

        Args:
            data (pd.DataFrame): DataFrame a escribir
            file_path (str): Ruta del archivo de destino
            index (bool): Si incluir el índice en el archivo
        """
        CSVHandler._atomic_write(
            file_path,
            lambda handle: data.to_csv(handle, index=index, float_format=FLOAT_FORMAT,
                                       lineterminator="\n"),
        )

    @staticmethod
    def write_json(payload: Dict[str, Any], file_path: str) -> None:
        """
        Escribe un resumen JSON de forma atómica.

        Args:
            payload (dict): Datos serializables
            file_path (str): Ruta del archivo de destino
        """
        def _dump(handle):
            json.dump(payload, handle, indent=2, ensure_ascii=False, sort_keys=True)
            handle.write("\n")

        CSVHandler._atomic_write(file_path, _dump)

    @staticmethod
    def sibling_path(output_path: str, label: str, extension: str = ".csv") -> str:
        """
        Ruta derivada <stem>_<label><extension> junto a output_path.

        Args:
            output_path (str): Ruta base
            label (str): Sufijo

        Returns:
            str: Ruta derivada
        """
        stem, _ = os.path.splitext(output_path)
        return f"{stem}_{label}{extension}"
