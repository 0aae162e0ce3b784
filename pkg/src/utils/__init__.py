"""Utility modules."""
from src.utils.config import settings
from src.utils.logger import attach_run_log, detach_run_log, logger, progress_disabled

__all__ = ["settings", "logger", "progress_disabled", "attach_run_log", "detach_run_log"]
