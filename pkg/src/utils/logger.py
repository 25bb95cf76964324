"""
Utility functions for logging.
"""

import logging
import sys

from utils.config import PROJECT_ROOT, setting

DEFAULT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logger(name, level=None):
    """
    Set up a logger with both file and console handlers.
    
    Args:
        name: Logger name
        level: Logging level (default: logging.level from config.yaml)
    
    Returns:
        Logger instance
    """
    if level is None:
        level = getattr(logging, str(setting('logging.level', 'INFO')).upper(), logging.INFO)

    logger = logging.getLogger(name)
    logger.setLevel(level)
    
    # Avoid adding handlers multiple times
    if logger.handlers:
        return logger
    
    formatter = logging.Formatter(
        setting('logging.format', DEFAULT_FORMAT),
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)
    
    log_file = PROJECT_ROOT / setting('logging.file', 'logs/censorlab.log')
    try:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
    except OSError:
        # read-only checkouts still get console logging
        return logger
    file_handler.setLevel(level)
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)
    
    return logger


def set_level(level):
    """Change the level of every censorlab logger (used by --log-level)."""
    numeric = getattr(logging, str(level).upper(), logging.INFO)
    for logger in logging.Logger.manager.loggerDict.values():
        if isinstance(logger, logging.Logger) and logger.handlers:
            logger.setLevel(numeric)
            for handler in logger.handlers:
                handler.setLevel(numeric)
