import logging

import pytest

from src.cli import build_parser
from src.constants import LOG_CONSOLE_LEVEL, LOG_FILE_LEVEL
from src.logger import CONSOLE_HANDLER_NAME, configure_logger, set_console_level


@pytest.fixture
def console_handler():
    handler = logging.StreamHandler()
    handler.set_name(CONSOLE_HANDLER_NAME)
    handler.setLevel(LOG_CONSOLE_LEVEL)
    root = logging.getLogger()
    root.addHandler(handler)
    yield handler
    root.removeHandler(handler)


def test_console_level_follows_the_requested_threshold(console_handler):
    other = logging.StreamHandler()
    other.setLevel(logging.DEBUG)
    set_console_level("warning")
    assert console_handler.level == logging.WARNING
    assert other.level == logging.DEBUG


def test_configure_logger_keeps_existing_handlers(console_handler):
    before = list(logging.getLogger().handlers)
    root = configure_logger("ERROR")
    assert root is logging.getLogger()
    assert root.handlers == before
    assert root.level == logging.DEBUG
    assert LOG_FILE_LEVEL == "DEBUG"


def test_cli_accepts_log_level():
    args = build_parser().parse_args(["steady", "--config", "c.yaml", "--log-level", "DEBUG"])
    assert args.log_level == "DEBUG"
    with pytest.raises(SystemExit):
        build_parser().parse_args(["steady", "--config", "c.yaml", "--log-level", "LOUD"])
