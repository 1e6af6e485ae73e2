"""
Deterministic writers for run artifacts: JSON reports, CSV tables, gnuplot-ready .dat files
"""
import dataclasses
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .field import FLOAT_FORMAT

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types for dataclasses, enums, numpy values and non-finite floats"""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
               if not callable(getattr(obj, f.name))}
        for name in ("total", "energy", "free_boundary_radius", "best", "C", "c"):
            attr = getattr(type(obj), name, None)
            if isinstance(attr, property):
                out[name] = to_jsonable(getattr(obj, name))
        return out
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if np.isnan(value):
            return None
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def write_json(path: PathLike, payload: Any) -> Path:
    """Sorted-key JSON with a trailing newline"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    logger.debug("wrote %s", path)
    return path


def write_csv(path: PathLike, table: Union[pd.DataFrame, Mapping[str, Sequence]],
              comments: Optional[Iterable[str]] = None) -> Path:
    """CSV with '#' comment lines on top and %.17g floats"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = table if isinstance(table, pd.DataFrame) else pd.DataFrame(dict(table))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for line in comments or ():
            handle.write(f"# {line}\n")
        frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


def write_dat(path: PathLike, columns: Mapping[str, Sequence[float]]) -> Path:
    """Whitespace-separated columns under a '#' header, readable by gnuplot"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({k: np.asarray(v, dtype=float) for k, v in columns.items()})
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("# " + " ".join(frame.columns) + "\n")
        frame.to_csv(handle, sep=" ", header=False, index=False, float_format=FLOAT_FORMAT,
                     lineterminator="\n")
    return path


def write_plot_stub(out_dir: PathLike, dat_files: Sequence[PathLike]) -> Path:
    """plot.gp drawing the first two columns of every .dat file"""
    out_dir = Path(out_dir)
    lines: List[str] = ["# generated by fblab", "set terminal pngcairo size 900,600", "set grid"]
    for dat in dat_files:
        name = Path(dat).name
        stem = Path(dat).stem
        lines.append(f'set output "{stem}.png"')
        lines.append(f'plot "{name}" using 1:2 with linespoints title "{stem}"')
    path = out_dir / "plot.gp"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def failure_report(out_dir: PathLike, command: str, error: BaseException,
                   resolved: Optional[Dict[str, Any]] = None) -> Path:
    """report.json describing a compute failure"""
    payload = {
        "status": "failed",
        "command": command,
        "error_type": type(error).__name__,
        "message": str(error),
        "config": resolved or {},
    }
    history = getattr(error, "history", None)
    if history:
        payload["history_length"] = len(history)
        payload["history_tail"] = [to_jsonable(h) for h in history[-10:]]
    interval = getattr(error, "interval", None)
    if interval is not None:
        payload["interval"] = list(interval)
    return write_json(Path(out_dir) / "report.json", payload)
