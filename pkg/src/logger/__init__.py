import logging
from logging.handlers import RotatingFileHandler
import os
from from_root import from_root
from datetime import datetime

from src.constants import (LOG_DIR_NAME, LOG_MAX_FILE_SIZE, LOG_BACKUP_COUNT, LOG_FILE_LEVEL, LOG_CONSOLE_LEVEL,
                           LOG_FORMAT)

LOG_FILE_NAME = f"{datetime.now().strftime('%m_%d_%Y_%H_%M_%S')}.log" # string format time

log_dir_path = os.path.join(from_root(), LOG_DIR_NAME)
os.makedirs(log_dir_path, exist_ok= True)
log_file_path = os.path.join(log_dir_path, LOG_FILE_NAME)

CONSOLE_HANDLER_NAME = "console"


def configure_logger(console_level: str = LOG_CONSOLE_LEVEL):
    """
    Configure application-wide logging with both file and console handlers.

    The root logger captures everything from LOG_FILE_LEVEL upwards into a
    size-rotated file under `logs/`; the console shows `console_level` and
    above so that long iterations and time integrations do not flood the terminal.
    """

    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG)

    # the package is imported from tests and worker processes as well
    if logger.hasHandlers():
        return logger

    formatter = logging.Formatter(LOG_FORMAT)

    file_handler = RotatingFileHandler(log_file_path, maxBytes= LOG_MAX_FILE_SIZE, backupCount= LOG_BACKUP_COUNT)
    file_handler.setFormatter(formatter)
    file_handler.setLevel(LOG_FILE_LEVEL)

    console_handler = logging.StreamHandler()
    console_handler.set_name(CONSOLE_HANDLER_NAME)
    console_handler.setFormatter(formatter)
    console_handler.setLevel(console_level.upper())

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)
    return logger


def set_console_level(level: str) -> None:
    """Change the threshold of the console handler installed by `configure_logger`."""
    for handler in logging.getLogger().handlers:
        if handler.get_name() == CONSOLE_HANDLER_NAME:
            handler.setLevel(level.upper())


configure_logger()
