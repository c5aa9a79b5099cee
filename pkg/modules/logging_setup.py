"""
Logging configuration for the CLI: colored console output plus a daily log file
"""

import logging
import os
from datetime import datetime
from typing import Optional

import colorlog

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def resolve_level(level: Optional[str]) -> int:
    """Level name from the argument, LNC_LOG_LEVEL, or INFO"""
    name = (level or os.getenv('LNC_LOG_LEVEL') or 'INFO').upper()
    value = getattr(logging, name, None)
    if not isinstance(value, int):
        raise ValueError(f"Unknown log level: {name}")
    return value


def setup_logging(level: Optional[str] = None, log_dir: str = 'logs', file_enabled: bool = True) -> str:
    """
    Configure the root logger with console and file handlers.

    Returns:
        Path of the log file ('' when file logging is disabled)
    """
    numeric = resolve_level(level)

    console_handler = colorlog.StreamHandler()
    console_handler.setLevel(numeric)
    console_handler.setFormatter(colorlog.ColoredFormatter(
        '%(log_color)s' + LOG_FORMAT,
        datefmt=DATE_FORMAT,
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'bold_red',
        },
    ))
    handlers = [console_handler]

    log_file = ''
    if file_enabled:
        os.makedirs(log_dir, exist_ok=True)
        log_file = os.path.join(log_dir, f"lnc_{datetime.now().strftime('%Y%m%d')}.log")
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(numeric)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
        handlers.append(file_handler)

    logging.basicConfig(level=numeric, handlers=handlers, force=True)
    return log_file
