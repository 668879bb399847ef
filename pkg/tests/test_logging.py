"""
Tests for logging setup and formatters.
"""
import json
import logging

import pytest

from event_turn_memory.config.settings import LoggingConfig
from event_turn_memory.utils.logging import (
    ColoredFormatter,
    JSONFormatter,
    MemoryLogger,
    log_info,
    log_performance,
    log_warning,
    memory_logger,
    setup_logging,
)


def make_record(message="hello", level=logging.INFO, **extra):
    record = logging.LogRecord("event_turn_memory.test", level, __file__, 10, message, None, None)
    for key, value in extra.items():
        setattr(record, key, value)
    return record


class TestFormatters:
    def test_json_includes_domain_fields(self):
        record = make_record("gateway call", family="final_qa", prompt_tokens=12, unrelated="x")
        entry = json.loads(JSONFormatter().format(record))

        assert entry["message"] == "gateway call"
        assert entry["level"] == "INFO"
        assert entry["family"] == "final_qa"
        assert entry["prompt_tokens"] == 12
        assert "unrelated" not in entry

    def test_colored_leaves_record_untouched(self):
        record = make_record(level=logging.WARNING)
        output = ColoredFormatter("%(levelname)s %(message)s").format(record)

        assert "\033[33m" in output
        assert record.levelname == "WARNING"


class TestMemoryLogger:
    @pytest.fixture
    def memory_logger(self):
        memory_logger = MemoryLogger("event_turn_memory.logging_test")
        yield memory_logger
        for handler in list(memory_logger.logger.handlers):
            handler.close()
            memory_logger.logger.removeHandler(handler)

    def test_configure_is_idempotent(self, memory_logger):
        memory_logger.configure()
        memory_logger.configure()

        assert len(memory_logger.logger.handlers) == 1

    def test_file_handlers_write_json(self, memory_logger, tmp_path):
        log_path = tmp_path / "logs" / "memory.log"
        memory_logger.configure(level="DEBUG", file_enabled=True, file_path=str(log_path))

        memory_logger.log_event_update(event_id=3, turn_id=17, mode="append", volume=11)
        for handler in memory_logger.logger.handlers:
            handler.flush()

        entry = json.loads(log_path.read_text().splitlines()[-1])
        assert entry["event_id"] == 3
        assert entry["mode"] == "append"
        assert (tmp_path / "logs" / "errors.log").exists()

    def test_setup_logging_from_settings(self):
        package_logger = logging.getLogger("event_turn_memory")
        handlers, level = list(package_logger.handlers), package_logger.level
        try:
            setup_logging(LoggingConfig(level="WARNING"))
            assert package_logger.level == logging.WARNING
        finally:
            package_logger.handlers = handlers
            package_logger.setLevel(level)


class TestLogPerformance:
    def test_returns_result(self):
        @log_performance
        def add(a, b):
            return a + b

        assert add(2, 3) == 5
        assert add.__name__ == "add"

    def test_logs_and_reraises(self, caplog):
        @log_performance
        def explode():
            raise RuntimeError("boom")

        with pytest.raises(RuntimeError):
            explode()

        assert "Failed" in caplog.text
        assert "boom" in caplog.text


class TestHelpers:
    def test_info_and_warning_carry_extras(self, caplog):
        caplog.set_level(logging.INFO, logger="event_turn_memory")

        log_info("Built memory", conversation_id="c1")
        log_warning("Question failed", conversation_id="c1", mode="flat")

        info, warning = caplog.records[-2:]
        assert (info.levelname, info.getMessage()) == ("INFO", "Built memory")
        assert info.conversation_id == "c1"
        assert warning.levelname == "WARNING"
        assert warning.mode == "flat"

    def test_logger_log_error_adds_context_and_traceback(self, caplog):
        try:
            raise KeyError("turn 9")
        except KeyError as e:
            memory_logger.log_error(e, context="Query")

        record = caplog.records[-1]
        assert record.levelname == "ERROR"
        assert record.getMessage() == "Query | Error: 'turn 9'"
        assert record.exc_info[0] is KeyError

    def test_logger_log_error_without_context(self, caplog):
        memory_logger.log_error(ValueError("bad"))

        assert caplog.records[-1].getMessage() == "Error: bad"
