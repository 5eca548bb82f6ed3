"""Service layer: ingestion and read-only queries."""

from cosmocrowd.services.ingest_service import IngestReport, RejectedLine, ingest_lines

__all__ = ["IngestReport", "RejectedLine", "ingest_lines"]
