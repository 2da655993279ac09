"""
Configuration for civ
Defaults live in civ_config.json; a .env file and CIV_* environment variables override them
"""

import functools
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError

logger = logging.getLogger(__name__)

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG_PATH = REPO_ROOT / "civ_config.json"
ENV_PREFIX = "CIV_"

DEFAULT_CONFIG: Dict[str, Any] = {
    "enumeration_cap": 20,
    "strength_tolerance": 1e-12,
    "rank_tolerance": 1e-10,
    "pd_tolerance": 1e-10,
    "default_jobs": 4,
    "fixtures_dir": "fixtures",
    "log_level": "INFO",
    "api_key": "",
}


class CivSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    enumeration_cap: int = 20
    strength_tolerance: float = 1e-12
    rank_tolerance: float = 1e-10
    pd_tolerance: float = 1e-10
    default_jobs: int = 4
    fixtures_dir: str = "fixtures"
    log_level: str = "INFO"
    api_key: str = ""

    @property
    def fixtures_path(self) -> Path:
        path = Path(self.fixtures_dir)
        return path if path.is_absolute() else REPO_ROOT / path


def _load_config_file(config_path: Optional[Path]) -> Dict[str, Any]:
    """Load the JSON config file, falling back to the built-in defaults"""
    try:
        if config_path is None:
            config_path = Path(os.environ.get(f"{ENV_PREFIX}CONFIG", DEFAULT_CONFIG_PATH))
        with open(config_path, "r") as f:
            config = json.load(f)
        logger.debug(f"Loaded configuration from {config_path}")
        return {**DEFAULT_CONFIG, **config}
    except Exception as e:
        logger.warning(f"Error loading configuration: {str(e)}; using defaults")
        return dict(DEFAULT_CONFIG)


def load_settings(config_path: Optional[Path] = None) -> CivSettings:
    """
    Build settings from the config file and environment overrides

    Args:
        config_path: Optional explicit JSON file; defaults to $CIV_CONFIG or civ_config.json

    Returns:
        Frozen settings object
    """
    load_dotenv()
    config = _load_config_file(config_path)

    for key in CivSettings.model_fields:
        value = os.environ.get(f"{ENV_PREFIX}{key.upper()}")
        if value is not None:
            config[key] = value

    try:
        return CivSettings(**{k: v for k, v in config.items() if k in CivSettings.model_fields})
    except ValidationError as e:
        logger.error(f"Invalid configuration values: {e}")
        raise


@functools.lru_cache(maxsize=1)
def get_settings() -> CivSettings:
    return load_settings()
