import json
import logging
import os
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

logger = logging.getLogger(__name__)

VERSION = "0.1.0"
SIGNIFICANT_DIGITS = 12


def get_thread_count(requested: Optional[int] = None) -> int:
    """Threads for parameter sweeps: flag, then QGRAPH_THREADS, then the CPU count"""
    if requested is not None and requested > 0:
        return requested
    env_value = os.getenv("QGRAPH_THREADS")
    if env_value:
        try:
            value = int(env_value)
            if value > 0:
                return value
        except ValueError:
            logger.warning(f"⚠️ Ignoring non-integer QGRAPH_THREADS={env_value!r}")
    return os.cpu_count() or 1


def format_number(x: Any) -> str:
    """Fixed 12 significant digit rendering so identical runs give identical bytes"""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    value = float(x)
    if value == 0.0:
        return "0"
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def format_time(seconds):
    """Format seconds into a readable time string"""
    if seconds < 1:
        return f"{seconds * 1000:.0f} ms"
    elif seconds < 60:
        return f"{seconds:.1f} seconds"
    else:
        minutes = seconds // 60
        return f"{minutes:.0f} minutes {seconds % 60:.0f} seconds"


def to_jsonable(value: Any) -> Any:
    """Convert results to JSON types with the CSV float formatting applied"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(value.real), to_jsonable(value.imag)]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(format_number(value))
    return value


def create_result_payload(command: str, params: Dict[str, Any], results: List[Any]) -> Dict[str, Any]:
    """Standard JSON document for a finished command"""
    return {
        "command": command,
        "params": to_jsonable(params),
        "results": to_jsonable(results),
        "version": VERSION,
    }


def render_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


def render_csv(header: List[str], rows: Iterable[Iterable[Any]]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else format_number(v) for v in row))
    return "\n".join(lines) + "\n"


def log_command_usage(command: str, params: Dict[str, Any]):
    """Log command usage with its non-default parameters"""
    shown = ", ".join(f"{k}={v}" for k, v in params.items() if v is not None)
    logger.info(f"🚀 Command '{command}' started ({shown})")
