"""Test configuration and fixtures."""

from pathlib import Path

import pytest
import structlog

from cosmocrowd.storage.log_store import LogEventStore


@pytest.fixture(autouse=True)
def _reset_structlog():
    """CLI runs point structlog at the captured stderr; undo that after each test."""
    yield
    structlog.reset_defaults()


@pytest.fixture
def data_dir(tmp_path: Path) -> Path:
    """Empty log directory for a store."""
    path = tmp_path / "logs"
    path.mkdir()
    return path


@pytest.fixture
def store(data_dir: Path) -> LogEventStore:
    return LogEventStore(data_dir, fsync=False)


@pytest.fixture
def dev_line() -> str:
    return "SHWR1|DEV|dev1|NEXUS7|12|1.0"


@pytest.fixture
def ev_line() -> str:
    return "SHWR1|EV|dev1|1394450000000|0|50.450100|30.523400|120.0|3"
