"""
Tests for the pipeline log routing.
"""
import logging

from utils.logger import PACKAGE_LOGGERS, setup_logger


def _flush(logger):
    for handler in logger.handlers:
        handler.flush()


def test_package_messages_reach_the_run_log(tmp_path):
    logger = setup_logger(name="fsispectra_test", log_level="WARNING", log_file="run.log", log_dir=str(tmp_path))
    logging.getLogger("models.spectrum").debug("eigen solve detail")
    _flush(logger)
    text = (tmp_path / "run.log").read_text(encoding="utf-8")
    assert "Logger initialized" in text
    assert "models.spectrum - DEBUG - eigen solve detail" in text


def test_repeated_setup_replaces_handlers(tmp_path):
    for _ in range(2):
        logger = setup_logger(name="fsispectra_test", log_file="run.log", log_dir=str(tmp_path / "logs"))
    assert len(logger.handlers) == 2
    for package in PACKAGE_LOGGERS:
        package_logger = logging.getLogger(package)
        assert len(package_logger.handlers) == 2
        assert not package_logger.propagate
    assert (tmp_path / "logs" / "run.log").exists()
