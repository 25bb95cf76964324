"""
Experiment configuration files (JSON).

Example:
    {
      "command": "verify-censoring",
      "models": [{"kind": "ising", "family": "path", "graph_params": {"n": 3}, "beta": 0.4}],
      "system_files": ["../systems/p3_ising.json"],
      "schedules": [{"kind": "random_scan", "length": 6}],
      "epsilon": 0.25,
      "seeds": {"start": 0, "count": 100},
      "tolerances": {"inequality": 1e-9},
      "record_timing": false,
      "params": {"max_len": 5}
    }

Relative file paths are resolved against the config file's directory.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
import sys

sys.path.append(str(Path(__file__).parent.parent))
from models.spin_models import ModelSpec, build_system
from schedules.specs import ScheduleSpec
from systems.gibbs import GibbsSystem
from systems.io import load_system
from utils.config import get_setting, load_config, load_json, merge_config
from utils.exceptions import CensorLabError, ConfigError

COMMANDS = ('verify-censoring', 'compare-schedules', 'contraction', 'hanging', 'mc')
FIELDS = ('command', 'models', 'model', 'system_files', 'schedules', 'epsilon', 'seeds', 'output',
          'tolerances', 'record_timing', 'params')


def _seeds(value: Any) -> List[int]:
    if value is None:
        return [0]
    if isinstance(value, int):
        return [value]
    if isinstance(value, dict):
        try:
            start, count = int(value.get('start', 0)), int(value['count'])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"seed range needs integer 'start' and 'count': {value}") from e
        if count < 1:
            raise ConfigError(f"seed count must be positive, got {count}")
        return list(range(start, start + count))
    if isinstance(value, list) and all(isinstance(s, int) for s in value) and value:
        return list(value)
    raise ConfigError(f"seeds must be an integer, a nonempty list or {{start, count}}, got {value!r}")


@dataclass
class ExperimentConfig:
    command: Optional[str] = None
    models: List[ModelSpec] = field(default_factory=list)
    system_files: List[Path] = field(default_factory=list)
    schedules: List[ScheduleSpec] = field(default_factory=list)
    epsilon: float = 0.25
    seeds: List[int] = field(default_factory=lambda: [0])
    output: Optional[Path] = None
    tolerances: Dict[str, float] = field(default_factory=dict)
    record_timing: bool = False
    params: Dict[str, Any] = field(default_factory=dict)
    source: Optional[Path] = None

    def __post_init__(self):
        if self.command is not None and self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if not 0.0 < float(self.epsilon) < 1.0:
            raise ConfigError(f"epsilon must be in (0, 1), got {self.epsilon}")
        for path in self.system_files:
            if not Path(path).is_file():
                raise ConfigError(f"system file {path} does not exist")
        for key, value in self.tolerances.items():
            if key not in ('mass', 'equality', 'inequality'):
                raise ConfigError(f"unknown tolerance {key!r}")
            if not float(value) > 0:
                raise ConfigError(f"tolerance {key} must be positive, got {value}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Optional[Path] = None,
                  source: Optional[Path] = None) -> 'ExperimentConfig':
        if not isinstance(data, dict):
            raise ConfigError("experiment config must be a JSON object")
        unknown = sorted(set(data) - set(FIELDS))
        if unknown:
            raise ConfigError(f"unknown experiment config fields {unknown}")
        base_dir = Path(base_dir) if base_dir is not None else Path.cwd()

        raw_models = list(data.get('models') or [])
        if data.get('model') is not None:
            raw_models.insert(0, data['model'])
        try:
            models = [ModelSpec.from_dict(m) for m in raw_models]
            schedules = [ScheduleSpec.from_dict(s) for s in data.get('schedules') or []]
        except CensorLabError as e:
            raise ConfigError(f"invalid experiment config: {e}") from e
        except TypeError as e:
            raise ConfigError(f"invalid model or schedule entry: {e}") from e

        output = data.get('output')
        return cls(
            command=data.get('command'),
            models=models,
            system_files=[_resolve(base_dir, p) for p in data.get('system_files') or []],
            schedules=schedules,
            epsilon=float(data.get('epsilon', get_setting(load_config(), 'mixing.epsilon', 0.25))),
            seeds=_seeds(data.get('seeds')),
            output=_resolve(base_dir, output) if output else None,
            tolerances={k: float(v) for k, v in (data.get('tolerances') or {}).items()},
            record_timing=bool(data.get('record_timing', False)),
            params=dict(data.get('params') or {}),
            source=source,
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> 'ExperimentConfig':
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        try:
            data = load_json(str(path))
        except ValueError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        return cls.from_dict(data, base_dir=path.parent, source=path)

    # ----- derived values -----

    def settings(self) -> Dict[str, Any]:
        """Default configuration with this experiment's tolerance overrides."""
        return merge_config(load_config(), {'tolerances': self.tolerances})

    def tolerance(self, key: str = 'inequality') -> float:
        return float(get_setting(self.settings(), f"tolerances.{key}", 1e-9))

    def param(self, key: str, default: Any = None) -> Any:
        return self.params.get(key, default)

    def build_systems(self) -> List[Tuple[str, GibbsSystem]]:
        """(label, system) for every model spec and system file, in config order."""
        systems = [(spec.label(), build_system(spec)) for spec in self.models]
        for path in self.system_files:
            system = load_system(path)
            systems.append((system.name or Path(path).stem, system))
        if not systems:
            raise ConfigError("experiment config names no models or system files")
        return systems

    def with_overrides(self, seed: Optional[int] = None, output: Optional[Path] = None) -> 'ExperimentConfig':
        """Apply --seed (first seed of a run of the same length) and --out."""
        if seed is not None:
            self.seeds = list(range(int(seed), int(seed) + len(self.seeds)))
        if output is not None:
            self.output = Path(output)
        return self


def _resolve(base_dir: Path, path: Union[str, Path]) -> Path:
    path = Path(path)
    return path if path.is_absolute() else (base_dir / path)
