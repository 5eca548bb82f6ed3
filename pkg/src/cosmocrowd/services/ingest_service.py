"""Ingestion service - decoding, validation and durable append of payloads.

Each line of a payload is handled independently; a malformed line never
blocks the lines after it. Accepted records are appended to the log before
the report is returned.
"""

import structlog
from pydantic import BaseModel, Field

from cosmocrowd.exceptions import CodecError, UnknownDeviceError
from cosmocrowd.models.records import DeviceProfile
from cosmocrowd.parsers.protocol import decode_record
from cosmocrowd.storage.base import EventStore

logger = structlog.get_logger()


class RejectedLine(BaseModel):
    """One rejected payload line."""

    line: int = Field(..., description="One-based line number within the payload")
    error: str = Field(..., description="Machine-readable error code")
    detail: str


class IngestReport(BaseModel):
    """Outcome of one payload."""

    accepted: int = 0
    rejected: list[RejectedLine] = Field(default_factory=list)


def split_payload(payload: str) -> list[str]:
    """Split on newlines; a final terminating newline does not add a line."""
    lines = payload.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


async def ingest_lines(
    store: EventStore,
    payload: str,
    min_time_ms: int = 0,
    max_time_ms: int = 4_102_444_800_000,
) -> IngestReport:
    """Decode, validate and durably append every valid line of a payload.

    Args:
        store: Target store.
        payload: One or more protocol lines.
        min_time_ms: Earliest accepted UTC timestamp.
        max_time_ms: Latest accepted UTC timestamp.

    Returns:
        Count of accepted lines and the rejected ones with their errors.

    Raises:
        StorageError: The append failed; nothing in the payload was accepted.
    """
    report = IngestReport()
    async with store.transaction() as tx:
        for line_no, line in enumerate(split_payload(payload), start=1):
            try:
                record = decode_record(line, min_time_ms=min_time_ms, max_time_ms=max_time_ms)
                if not isinstance(record, DeviceProfile) and not tx.is_registered(
                    record.device_id
                ):
                    raise UnknownDeviceError(record.device_id)
            except (CodecError, UnknownDeviceError) as e:
                report.rejected.append(RejectedLine(line=line_no, error=e.code, detail=str(e)))
                continue
            tx.add(record)
            report.accepted += 1

    store.accepted_total += report.accepted
    store.rejected_total += len(report.rejected)
    logger.info(
        "Payload ingested",
        accepted=report.accepted,
        rejected=len(report.rejected),
    )
    return report

