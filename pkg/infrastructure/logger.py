import logging
import os
import sys
import tempfile

ROOT = "splitlr"
FORMAT = "[%(asctime)s] - %(name)s %(levelname)s %(message)s"
_TRUTHY = {"1", "true", "yes", "on"}

_loggers = {}


def _writable_log_path(target_file):
    """Resolve where the log file goes, or None when no directory accepts it."""
    if os.path.isabs(target_file):
        directory = os.path.dirname(target_file)
        return target_file if os.access(directory, os.W_OK) else None
    for directory in (os.path.dirname(target_file), ".", tempfile.gettempdir()):
        if directory and os.path.isdir(directory) and os.access(directory, os.W_OK):
            return os.path.join(directory, os.path.basename(target_file))
    return None


def setup_logger(name=ROOT, level=None, toFile=False, fileName="splitlr.log"):
    """
    Configure the handlers of a top-level logger once.

    Args
        name: logger to configure; module loggers below it only propagate
        level: logging level; falls back to SPLITLR_LOG_LEVEL, then INFO
        toFile: also write to `fileName` (LOG_TO_FILE overrides)
        fileName: log file (LOG_FILE_PATH overrides)
    """
    if name in _loggers:
        return _loggers[name]

    logger = logging.getLogger(name)
    level = level or os.getenv("SPLITLR_LOG_LEVEL", "INFO")
    logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))
    formatter = logging.Formatter(FORMAT)

    # reload-safe
    if not logger.handlers:
        stream_handler = logging.StreamHandler(sys.stderr)
        stream_handler.setFormatter(formatter)
        logger.addHandler(stream_handler)

        if os.getenv("LOG_TO_FILE", str(toFile)).lower() in _TRUTHY:
            target_file = os.getenv("LOG_FILE_PATH", fileName)
            path = _writable_log_path(target_file)
            if path is None:
                logger.error("File logging disabled: no writable directory for %s", target_file)
            else:
                try:
                    file_handler = logging.FileHandler(path)
                except OSError as e:
                    logger.error("File logging disabled: %s", e)
                else:
                    file_handler.setFormatter(formatter)
                    logger.addHandler(file_handler)
        logger.propagate = False

    _loggers[name] = logger
    return logger


def get_logger(name=ROOT):
    """Logger for `name`; names under the package root share the root's handlers."""
    if name == ROOT or not name.startswith(ROOT + "."):
        return setup_logger(name=name)
    setup_logger(ROOT)
    return logging.getLogger(name)
