"""
Logging configuration for the event-turn memory engine.
"""
import functools
import json
import logging
import logging.handlers
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

EXTRA_FIELDS = (
    'conversation_id', 'turn_id', 'event_id', 'family', 'stage',
    'prompt_tokens', 'completion_tokens', 'execution_time', 'mode',
)


class ColoredFormatter(logging.Formatter):
    """Colored console log formatter."""

    COLORS = {
        'DEBUG': '\033[36m',     # Cyan
        'INFO': '\033[32m',      # Green
        'WARNING': '\033[33m',   # Yellow
        'ERROR': '\033[31m',     # Red
        'CRITICAL': '\033[35m',  # Magenta
    }
    RESET = '\033[0m'

    def format(self, record):
        # Work on a copy so other handlers see the plain level name
        record = logging.makeLogRecord(record.__dict__)
        if record.levelname in self.COLORS:
            record.levelname = f"{self.COLORS[record.levelname]}{record.levelname}{self.RESET}"
        return super().format(record)


class JSONFormatter(logging.Formatter):
    """JSON log formatter for structured logging."""

    def format(self, record):
        log_entry: Dict[str, Any] = {
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno,
        }

        for field in EXTRA_FIELDS:
            if hasattr(record, field):
                log_entry[field] = getattr(record, field)

        if record.exc_info:
            log_entry['exception'] = self.formatException(record.exc_info)

        return json.dumps(log_entry, default=str)


class MemoryLogger:
    """Domain logger for ingestion, retrieval and gateway activity."""

    def __init__(self, name: str = "event_turn_memory"):
        self.logger = logging.getLogger(name)
        self._file_handlers_attached = False

    def configure(self, level: str = "INFO", file_enabled: bool = False,
                  file_path: str = "logs/event_turn_memory.log",
                  max_file_size: int = 10 * 1024 * 1024, backup_count: int = 5):
        """Attach console and (optionally) rotating JSON file handlers."""
        self.logger.setLevel(getattr(logging, level.upper(), logging.INFO))

        if not any(isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler)
                   for h in self.logger.handlers):
            console_handler = logging.StreamHandler(sys.stderr)
            console_handler.setFormatter(ColoredFormatter(
                '%(asctime)s | %(levelname)s | %(name)s | %(message)s',
                datefmt='%H:%M:%S'
            ))
            self.logger.addHandler(console_handler)

        if file_enabled and not self._file_handlers_attached:
            log_path = Path(file_path)
            log_path.parent.mkdir(parents=True, exist_ok=True)

            file_handler = logging.handlers.RotatingFileHandler(
                log_path, maxBytes=max_file_size, backupCount=backup_count
            )
            file_handler.setFormatter(JSONFormatter())
            file_handler.setLevel(logging.DEBUG)

            error_handler = logging.handlers.RotatingFileHandler(
                log_path.with_name("errors.log"),
                maxBytes=max_file_size // 2, backupCount=backup_count
            )
            error_handler.setFormatter(logging.Formatter(
                '%(asctime)s | %(levelname)s | %(name)s | %(message)s\n'
                'File: %(pathname)s:%(lineno)d | Function: %(funcName)s\n'
                '%(exc_text)s\n' + '-' * 80
            ))
            error_handler.setLevel(logging.ERROR)

            self.logger.addHandler(file_handler)
            self.logger.addHandler(error_handler)
            self._file_handlers_attached = True

    def log_ingest_turn(self, conversation_id: Optional[str], turn_id: int,
                        keywords: int, affiliated: int, created: bool):
        self.logger.debug(
            f"Ingested turn {turn_id} | keywords: {keywords} | "
            f"events: {affiliated}{' + new' if created else ''}",
            extra={'conversation_id': conversation_id, 'turn_id': turn_id}
        )

    def log_event_update(self, event_id: int, turn_id: int, mode: str, volume: int):
        self.logger.debug(
            f"Event {event_id} {mode} for turn {turn_id} | volume {volume}",
            extra={'event_id': event_id, 'turn_id': turn_id, 'mode': mode}
        )

    def log_retrieval(self, semantic: int, predicted: int, candidates: int, final: int,
                      mode: str = "full"):
        self.logger.debug(
            f"Retrieval [{mode}]: semantic {semantic} | predicted {predicted} | "
            f"candidates {candidates} → final {final}",
            extra={'mode': mode}
        )

    def log_gateway_call(self, family: str, stage: str, prompt_tokens: int,
                         completion_tokens: int, attempt: int, ok: bool):
        level = logging.DEBUG if ok else logging.WARNING
        self.logger.log(
            level,
            f"LLM {family} attempt {attempt} | {prompt_tokens}+{completion_tokens} tokens"
            f"{'' if ok else ' | invalid output'}",
            extra={'family': family, 'stage': stage, 'prompt_tokens': prompt_tokens,
                   'completion_tokens': completion_tokens}
        )

    def log_error(self, error: Exception, context: Optional[str] = None):
        """Log an error with its traceback and optional context."""
        message = f"Error: {error}"
        if context:
            message = f"{context} | {message}"
        self.logger.error(message, exc_info=error)

    def log_benchmark_complete(self, mode: str, questions: int, failures: int,
                               execution_time: float):
        self.logger.info(
            f"Benchmark [{mode}] complete: {questions} questions | "
            f"{failures} failures | {execution_time:.2f}s",
            extra={'mode': mode, 'execution_time': execution_time}
        )


# Global logger instance
memory_logger = MemoryLogger()


def setup_logging(config=None) -> MemoryLogger:
    """Configure the package logger from the logging settings section."""
    if config is None:
        from ..config.settings import get_config
        config = get_config().logging
    memory_logger.configure(
        level=config.level,
        file_enabled=config.file_enabled,
        file_path=config.file_path,
        max_file_size=config.max_file_size,
        backup_count=config.backup_count,
    )
    return memory_logger


def log_info(message: str, **kwargs):
    memory_logger.logger.info(message, extra=kwargs)


def log_warning(message: str, **kwargs):
    memory_logger.logger.warning(message, extra=kwargs)


def log_error(message: str, error: Optional[Exception] = None, **kwargs):
    if error:
        memory_logger.logger.error(f"{message}: {error}", exc_info=True, extra=kwargs)
    else:
        memory_logger.logger.error(message, extra=kwargs)


def log_debug(message: str, **kwargs):
    memory_logger.logger.debug(message, extra=kwargs)


def log_performance(func):
    """Decorator to log function performance."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        function_name = f"{func.__module__}.{func.__name__}"

        try:
            log_debug(f"Starting {function_name}")
            result = func(*args, **kwargs)
            execution_time = time.perf_counter() - start_time
            log_debug(f"Completed {function_name} in {execution_time:.3f}s",
                      execution_time=execution_time)
            return result

        except Exception as e:
            execution_time = time.perf_counter() - start_time
            log_error(f"Failed {function_name}", error=e, execution_time=execution_time)
            raise

    return wrapper
