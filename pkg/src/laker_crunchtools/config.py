"""Process configuration handling.

This module reads the few settings that come from the environment rather
than from an experiment file: sweep parallelism, log level and the default
output directory. Experiment parameters live in models.ExperimentConfig.
"""

import logging
import os
from pathlib import Path

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_THREADS = 1
DEFAULT_LOG_LEVEL = "WARNING"
DEFAULT_OUTPUT_DIR = "results"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Config:
    """Environment-derived settings.

    LAKER_THREADS caps how many sweep cells run concurrently. Dense BLAS
    already uses several cores per cell, so the default is one.
    """

    def __init__(self) -> None:
        """Initialize configuration from environment variables.

        Raises:
            ConfigurationError: If a variable is set to an invalid value.
        """
        raw_threads = os.environ.get("LAKER_THREADS", "").strip()
        if raw_threads:
            try:
                threads = int(raw_threads)
            except ValueError as e:
                raise ConfigurationError(
                    f"LAKER_THREADS must be a positive integer, got {raw_threads!r}"
                ) from e
            if threads < 1:
                raise ConfigurationError(
                    f"LAKER_THREADS must be a positive integer, got {threads}"
                )
            self._threads = threads
        else:
            self._threads = DEFAULT_THREADS

        log_level = os.environ.get("LAKER_LOG_LEVEL", DEFAULT_LOG_LEVEL).strip().upper()
        if log_level not in LOG_LEVELS:
            raise ConfigurationError(
                f"LAKER_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, got {log_level!r}"
            )
        self._log_level = log_level

        self._output_dir = Path(os.environ.get("LAKER_OUTPUT_DIR", DEFAULT_OUTPUT_DIR))

        logger.debug("Configuration loaded (%s)", self)

    @property
    def threads(self) -> int:
        """Maximum number of sweep cells executing at once."""
        return self._threads

    @property
    def log_level(self) -> str:
        """Logging level name for the CLI."""
        return self._log_level

    @property
    def output_dir(self) -> Path:
        """Fallback output directory for sweep results."""
        return self._output_dir

    def __repr__(self) -> str:
        return (
            f"Config(threads={self._threads}, log_level={self._log_level}, "
            f"output_dir={self._output_dir})"
        )


_config: Config | None = None


def get_config() -> Config:
    """Get the global configuration instance.

    This function lazily initializes the configuration on first call.
    Subsequent calls return the same instance.

    Raises:
        ConfigurationError: If configuration is invalid.
    """
    global _config
    if _config is None:
        _config = Config()
    return _config
