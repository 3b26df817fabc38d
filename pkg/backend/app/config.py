"""Runtime settings read from the environment (and an optional .env file)."""

import logging
import os
from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, Field

# Repository root: backend/app/config.py -> ../../
ROOT_DIR = Path(__file__).parent.parent.parent
DEFAULT_OUTPUT_DIR = ROOT_DIR / 'outputs' / 'data'

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Settings(BaseModel):
    """Environment-driven knobs. None of them changes numeric results."""

    threads: int = Field(default=1, ge=1)
    output_dir: Path = DEFAULT_OUTPUT_DIR
    log_level: str = "INFO"
    batch_floats: int = Field(default=1 << 22, ge=1024)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Load .env once and build the validated settings"""
    load_dotenv()

    threads = os.getenv('RSP_THREADS')
    return Settings(
        threads=int(threads) if threads else (os.cpu_count() or 1),
        output_dir=Path(os.getenv('RSP_OUTPUT_DIR', str(DEFAULT_OUTPUT_DIR))),
        log_level=os.getenv('RSP_LOG_LEVEL', 'INFO').upper(),
        batch_floats=int(os.getenv('RSP_BATCH_FLOATS', str(1 << 22))),
    )


_configured = False


def configure_logging(level: str = None) -> None:
    """Install a single stderr handler on the root logger"""
    global _configured
    level = (level or get_settings().log_level).upper()
    if _configured:
        logging.getLogger().setLevel(level)
        return
    logging.basicConfig(level=level, format=LOG_FORMAT)
    _configured = True
