"""
Utility modules for the event-turn memory engine.
"""
from .logging import (
    log_debug,
    log_error,
    log_info,
    log_performance,
    log_warning,
    memory_logger,
    setup_logging,
)
from .text import content_tokens, tokenize

__all__ = [
    "content_tokens",
    "log_debug",
    "log_error",
    "log_info",
    "log_performance",
    "log_warning",
    "memory_logger",
    "setup_logging",
    "tokenize",
]
