"""Tests for the structlog setup."""

import io
import json

from cosmocrowd.utils.logger import configure_logging, get_logger


def test_json_events_go_to_the_configured_stream() -> None:
    stream = io.StringIO()
    configure_logging(log_level="info", json_format=True, stream=stream)

    get_logger("ingest").info("Payload ingested", accepted=2)
    get_logger("ingest").debug("Not shown")

    (line,) = stream.getvalue().splitlines()
    event = json.loads(line)
    assert event["event"] == "Payload ingested"
    assert event["logger"] == "ingest"
    assert event["level"] == "info"
    assert event["accepted"] == 2
    assert "timestamp" in event


def test_unknown_level_falls_back_to_info() -> None:
    stream = io.StringIO()
    configure_logging(log_level="chatty", json_format=True, stream=stream)

    get_logger().debug("Hidden")
    get_logger().info("Shown")

    assert [json.loads(line)["event"] for line in stream.getvalue().splitlines()] == ["Shown"]
