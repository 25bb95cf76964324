"""
Configuration loading for censorlab.
Defaults live in config/config.yaml; experiment files (JSON) are merged on top.
"""

import copy
import json
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

PROJECT_ROOT = Path(__file__).parent.parent.parent
DEFAULT_CONFIG_PATH = PROJECT_ROOT / 'config' / 'config.yaml'

_cache: Dict[str, Dict] = {}


def load_config(path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load configuration from YAML file.

    Args:
        path: Config file path (default: config/config.yaml)

    Returns:
        Configuration dictionary (a copy; callers may mutate it)
    """
    return copy.deepcopy(_load(path))


def _load(path: Optional[str] = None) -> Dict[str, Any]:
    config_path = Path(path) if path else DEFAULT_CONFIG_PATH
    key = str(config_path.resolve())
    if key not in _cache:
        with open(config_path, 'r') as f:
            _cache[key] = yaml.safe_load(f) or {}
    return _cache[key]


def get_setting(config: Dict[str, Any], dotted_key: str, default: Any = None) -> Any:
    """Read a nested value such as 'tolerances.inequality'."""
    node = config
    for part in dotted_key.split('.'):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def setting(dotted_key: str, default: Any = None) -> Any:
    """Shortcut for get_setting on the default configuration."""
    return copy.deepcopy(get_setting(_load(), dotted_key, default))


def merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge override into a copy of base."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_json(path: str) -> Dict[str, Any]:
    """Load a JSON document (experiment configs, system definitions)."""
    with open(path, 'r') as f:
        return json.load(f)
