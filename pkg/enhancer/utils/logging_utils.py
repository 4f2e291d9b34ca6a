import logging
import os
from typing import Dict, Union

# Loggers handed out by get_logger, so the CLI can re-level all of them at once
_LOGGERS: Dict[str, logging.Logger] = {}


def _coerce_level(level: Union[int, str]) -> int:
    if isinstance(level, str):
        resolved = logging.getLevelName(level.upper())
        if not isinstance(resolved, int):
            raise ValueError(f"Unknown log level: {level}")
        return resolved
    return level


def get_logger(name: str, level=logging.INFO, log_to_file=False, log_file_path='enhancer.log'):
    """
    Configures and returns a logger instance.
    """
    logger = logging.getLogger(name)

    # Prevent adding multiple handlers if logger already configured
    if not logger.handlers:
        level = _coerce_level(level)
        logger.setLevel(level)

        formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

        # Console Handler
        ch = logging.StreamHandler()
        ch.setLevel(level)
        ch.setFormatter(formatter)
        logger.addHandler(ch)

        # File Handler (optional)
        if log_to_file:
            if os.path.dirname(log_file_path):
                os.makedirs(os.path.dirname(log_file_path), exist_ok=True)

            fh = logging.FileHandler(log_file_path)
            fh.setLevel(level)
            fh.setFormatter(formatter)
            logger.addHandler(fh)

    _LOGGERS[name] = logger
    return logger


def set_log_level(level: Union[int, str]) -> None:
    """Apply a level to every logger (and handler) created through get_logger."""
    level = _coerce_level(level)
    for logger in _LOGGERS.values():
        logger.setLevel(level)
        for handler in logger.handlers:
            handler.setLevel(level)


def add_file_handler(log_file_path: str) -> None:
    """Mirror every known logger into a log file (config key logging.log_to_file)."""
    if os.path.dirname(log_file_path):
        os.makedirs(os.path.dirname(log_file_path), exist_ok=True)
    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    target = os.path.abspath(log_file_path)
    for logger in _LOGGERS.values():
        if any(isinstance(h, logging.FileHandler) and h.baseFilename == target for h in logger.handlers):
            continue
        fh = logging.FileHandler(log_file_path)
        fh.setLevel(logger.level)
        fh.setFormatter(formatter)
        logger.addHandler(fh)
