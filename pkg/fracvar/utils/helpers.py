import concurrent.futures
import json
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from ..config import FRACVAR_THREADS, OutputFields
from .exceptions import InvalidParam
from .logger import CustomFormatter as cf
from .logger import logger


def thread_count() -> int:
    try:
        threads = int(FRACVAR_THREADS)
    except ValueError:
        raise InvalidParam(f"FRACVAR_THREADS must be a positive integer, got {FRACVAR_THREADS!r}")
    if threads < 1:
        raise InvalidParam(f"FRACVAR_THREADS must be a positive integer, got {threads}")
    return threads


def parallel_map(func: Callable, items: Iterable) -> List:
    """Map `func` over `items` in order, on up to FRACVAR_THREADS threads."""
    items = list(items)
    threads = min(thread_count(), max(1, len(items)))
    if threads == 1:
        return [func(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(func, items))


def load_config_file(path: str) -> Dict[str, str]:
    """Read `key=value` lines; blank lines and lines starting with # are skipped."""
    config = {}
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidParam(f"{path}:{number}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            config[key.strip().replace("_", "-")] = value.strip()
    return config


def grid_frame(t: np.ndarray, values: np.ndarray, estimate: Optional[float] = None) -> pd.DataFrame:
    frame = pd.DataFrame({OutputFields.T: t, OutputFields.VALUE: values})
    if estimate is not None:
        frame[OutputFields.ERROR] = estimate
    return frame


def write_frame(frame: pd.DataFrame, path: str, fmt: str = "csv", echo: Optional[dict] = None):
    """
    Write `frame` as CSV with 17 significant digits, or as JSON with the
    columns as lists next to a `config` echo.
    """
    if fmt == "csv":
        frame.to_csv(path, index=False, float_format=OutputFields.FLOAT_FORMAT)
    elif fmt == "json":
        payload = {column: frame[column].tolist() for column in frame.columns}
        payload["config"] = echo or {}
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    else:
        raise InvalidParam(f"Unknown output format {fmt!r}")
    logger.debug(f"Wrote {len(frame)} rows to {path}")


def summarize(info: dict) -> str:
    summary = f"SUMMARY: {info['command']} done. "
    if "n" in info:
        summary += f"Grid n={cf.BLUE}{info['n']}{cf.RESET}. "
    if "value_at_b" in info:
        summary += f"Value at b: {cf.GREEN}{info['value_at_b']:.12g}{cf.RESET}. "
    if "estimate_error" in info:
        summary += f"Error estimate {info['estimate_error']:.3e}. "
    if "residual_norm" in info:
        summary += f"Residual {info['residual_norm']:.3e}. "
    if info.get("compatibility_gap"):
        summary += f"|f(a,u0)| = {cf.YELLOW}{info['compatibility_gap']:.6g}{cf.RESET}. "
    if "suites" in info:
        for name, failures in info["suites"].items():
            color = cf.RED if failures else cf.GREEN
            summary += f"{name}: {color}{failures}{cf.RESET} failures. "
    if info.get("output"):
        summary += f"Results written to {info['output']}."
    return summary.strip()
