import json
import os
import tempfile
from pathlib import Path
from typing import Any, Callable, IO, List, Mapping

import numpy as np


def _atomic_write(path: Path, write: Callable[[IO[str]], None]) -> None:
    """Write through a temporary file in the target directory, then rename over ``path``"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temporary = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            write(f)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise


def write_csv(path: Path, times: np.ndarray, series: Mapping[str, np.ndarray]) -> None:
    """CSV with header ``t,<name>...`` and one row per checkpoint, 17 significant digits"""
    names = list(series)
    table = np.column_stack([np.asarray(times, dtype=float)] + [np.asarray(series[name], dtype=float) for name in names])
    _atomic_write(path, lambda f: np.savetxt(f, table, fmt="%.17g", delimiter=",", header=",".join(["t"] + names), comments=""))


def write_json(path: Path, data: Mapping[str, Any]) -> None:
    _atomic_write(path, lambda f: f.write(json.dumps(data, indent=2, sort_keys=True) + "\n"))


def read_golden(path: Path) -> List[str]:
    """Non-blank lines of a golden listing, stripped"""
    with open(path, "r", encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def format_value(value: float) -> str:
    return f"{value:.3e}"
