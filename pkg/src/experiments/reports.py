"""
Report and curve emission. JSON is written with sorted keys and two-space
indentation, CSV with a header row and no index, so reruns are byte-identical.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import sys

import numpy as np
import pandas as pd

sys.path.append(str(Path(__file__).parent.parent))
from utils.exceptions import ConfigError
from utils.logger import setup_logger

logger = setup_logger(__name__)


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None if np.isnan(value) else ('inf' if value > 0 else '-inf')
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(payload: Any) -> str:
    return json.dumps(_plain(payload), sort_keys=True, indent=2) + '\n'


def write_json(path: Union[str, Path], payload: Any) -> Path:
    path = Path(path)
    with open(path, 'w') as f:
        f.write(dumps(payload))
    logger.debug(f"wrote {path}")
    return path


def write_csv(path: Union[str, Path], frame: pd.DataFrame) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False)
    logger.debug(f"wrote {path} ({len(frame)} rows)")
    return path


def report(claim: str, verdict: str, witness: Any = None, tolerance: Optional[float] = None,
           seed: Optional[int] = None, wall_time: Optional[float] = None, **extra: Any) -> Dict[str, Any]:
    """The common report envelope."""
    return {'claim': claim, 'verdict': verdict, 'witness': witness, 'tolerance': tolerance,
            'seed': seed, 'wall_time': wall_time, **extra}


class ReportWriter:
    """Writes into an existing output directory; a missing directory is a configuration error."""

    def __init__(self, out_dir: Union[str, Path], record_timing: bool = False):
        out_dir = Path(out_dir)
        if not out_dir.is_dir():
            raise ConfigError(f"output directory {out_dir} does not exist")
        self.out_dir = out_dir
        self.record_timing = record_timing
        self.written: List[Path] = []

    def json(self, name: str, payload: Any) -> Path:
        path = write_json(self.out_dir / f"{name}.json", payload)
        self.written.append(path)
        return path

    def csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = write_csv(self.out_dir / f"{name}.csv", frame)
        self.written.append(path)
        return path

    def timing(self, seconds: float) -> Optional[float]:
        """wall_time field value; timings are always logged."""
        logger.info(f"finished in {seconds:.2f}s")
        return round(seconds, 3) if self.record_timing else None

    def slug(self, label: str) -> str:
        return ''.join(c if c.isalnum() or c in '-_.' else '_' for c in label)
