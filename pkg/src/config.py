"""
Runtime settings read from the environment (and an optional .env file).
"""

import os
import logging
from dataclasses import dataclass, asdict
from typing import Any, Dict, Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


@dataclass(frozen=True)
class Settings:
    """Process-wide defaults; explicit arguments always win over these."""
    seed: int = 0
    log_level: str = "INFO"
    workers: int = 1
    batch_size: int = 4096

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
        return default


def load_settings() -> Settings:
    """Build Settings from HEAVYTAIL_* environment variables."""
    load_dotenv()
    return Settings(
        seed=_int_env("HEAVYTAIL_SEED", 0),
        log_level=os.getenv("HEAVYTAIL_LOG_LEVEL", "INFO").upper(),
        workers=max(1, _int_env("HEAVYTAIL_WORKERS", 1)),
        batch_size=max(1, _int_env("HEAVYTAIL_BATCH", 4096)),
    )


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get or create the settings singleton."""
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings


def reset_settings() -> None:
    """Drop the cached settings so the next call re-reads the environment."""
    global _settings
    _settings = None


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging for an entry point (CLI or API)."""
    level_name = (level or get_settings().log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=LOG_FORMAT,
    )
