"""Logging configuration."""
import sys
from pathlib import Path
from loguru import logger
from src.utils.config import settings

FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} - {message}"

logger.remove()

# Console: short module path, no date
logger.add(
    sys.stdout,
    format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan> - <level>{message}</level>",
    level=settings.log_level,
    colorize=True
)

# Process-wide file log
logger.add(
    settings.log_file,
    format=FILE_FORMAT,
    level=settings.log_level,
    rotation="10 MB",
    retention="7 days",
    compression="zip"
)


def progress_disabled() -> bool:
    """Progress bars are shown only at INFO verbosity or below."""
    return settings.log_level.upper() not in ("TRACE", "DEBUG", "INFO")


def attach_run_log(directory: Path) -> int:
    """Copy everything logged during one run into <directory>/run.log."""
    path = Path(directory) / "run.log"
    path.parent.mkdir(parents=True, exist_ok=True)
    return logger.add(path, format=FILE_FORMAT, level="DEBUG", mode="w", encoding="utf-8")


def detach_run_log(handler_id: int):
    logger.remove(handler_id)


__all__ = ["logger", "progress_disabled", "attach_run_log", "detach_run_log"]
