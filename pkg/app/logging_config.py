import logging
import os
import sys
from logging.handlers import RotatingFileHandler

from pythonjsonlogger import jsonlogger

from app.config import settings

_LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s %(module)s %(funcName)s %(lineno)d"
_configured = False


def setup_logging(level: str | None = None, log_file: str | None = None):
    """Configure structured JSON logging to stderr and, optionally, a rotating file.

    Safe to call more than once; handlers are only installed on the first call.
    """
    global _configured

    root_logger = logging.getLogger()
    if _configured:
        return root_logger

    root_logger.setLevel(logging.DEBUG)
    json_formatter = jsonlogger.JsonFormatter(_LOG_FORMAT, rename_fields={"levelname": "level", "asctime": "timestamp"})

    log_file = log_file if log_file is not None else settings.log_file
    if log_file:
        os.makedirs(os.path.dirname(log_file) or ".", exist_ok=True)
        # 10MB per file, keep 5
        file_handler = RotatingFileHandler(log_file, maxBytes=10 * 1024 * 1024, backupCount=5)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(json_formatter)
        root_logger.addHandler(file_handler)

    # stderr only: CSV reports may go to stdout
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level or settings.LOG_LEVEL)
    console_handler.setFormatter(json_formatter)
    root_logger.addHandler(console_handler)

    _configured = True
    return root_logger


def get_logger(name):
    return logging.getLogger(name)
