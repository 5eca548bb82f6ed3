"""Append-only daily log storage for records.

Records are persisted as canonical protocol lines in ``events-YYYYMMDD.log``
files; the files are both the database and the audit trail. Replaying the
directory in lexical file order rebuilds the in-memory store.
"""

import asyncio
import os
from collections.abc import AsyncIterator, Callable
from contextlib import asynccontextmanager
from datetime import UTC, datetime
from pathlib import Path

import structlog

from cosmocrowd.exceptions import CodecError, CorruptLineError, StorageError, UnknownDeviceError
from cosmocrowd.models.records import AccelWindow, DeviceProfile, FlashEvent, Record, TrackSample
from cosmocrowd.parsers.protocol import decode_record, encode_record
from cosmocrowd.storage.base import StoreSnapshot

logger = structlog.get_logger()

LOG_GLOB = "events-*.log"


def log_file_name(day: datetime) -> str:
    return f"events-{day:%Y%m%d}.log"


def _utc_now() -> datetime:
    return datetime.now(UTC)


class LogTransaction:
    """Records staged by one payload against a LogEventStore."""

    def __init__(self, devices: dict[str, DeviceProfile]):
        self._devices = devices
        self._staged_devices: dict[str, DeviceProfile] = {}
        self.records: list[Record] = []

    def is_registered(self, device_id: str) -> bool:
        return device_id in self._staged_devices or device_id in self._devices

    def add(self, record: Record) -> None:
        if isinstance(record, DeviceProfile):
            self._staged_devices[record.device_id] = record
        self.records.append(record)


class LogEventStore:
    """In-memory record store backed by append-only daily log files.

    Reason: Appends are serialized by one asyncio lock so a payload's lines
    land contiguously; queries read snapshots, never the live lists.
    """

    def __init__(
        self,
        data_dir: Path,
        fsync: bool = True,
        clock: Callable[[], datetime] = _utc_now,
    ):
        """Initialize an empty store.

        Args:
            data_dir: Directory for the daily log files (created if missing).
            fsync: fsync after each append before acknowledging it.
            clock: UTC wall clock choosing the active log file.
        """
        self._data_dir = data_dir
        self._fsync = fsync
        self._clock = clock
        self._lock = asyncio.Lock()

        # Reason: devices dict is replaced, never mutated, once a snapshot may hold it
        self._devices: dict[str, DeviceProfile] = {}
        self._flashes: list[FlashEvent] = []
        self._tracks: list[TrackSample] = []
        self._accels: list[AccelWindow] = []
        self._snapshot = self._make_snapshot()

        self.accepted_total = 0
        self.rejected_total = 0
        self.corrupt_lines = 0

    @property
    def data_dir(self) -> Path:
        return self._data_dir

    # Reading

    def snapshot(self) -> StoreSnapshot:
        return self._snapshot

    def _make_snapshot(self) -> StoreSnapshot:
        return StoreSnapshot(
            devices=self._devices,
            _flashes=self._flashes,
            _tracks=self._tracks,
            _accels=self._accels,
            n_flashes=len(self._flashes),
            n_tracks=len(self._tracks),
            n_accels=len(self._accels),
        )

    def _apply(self, records: list[Record]) -> None:
        new_devices = [r for r in records if isinstance(r, DeviceProfile)]
        if new_devices:
            devices = dict(self._devices)
            for d in new_devices:
                if d.device_id in devices and devices[d.device_id] != d:
                    logger.info("Device profile replaced", device_id=d.device_id)
                devices[d.device_id] = d
            self._devices = devices
        for r in records:
            if isinstance(r, FlashEvent):
                self._flashes.append(r)
            elif isinstance(r, TrackSample):
                self._tracks.append(r)
            elif isinstance(r, AccelWindow):
                self._accels.append(r)
        self._snapshot = self._make_snapshot()

    # Writing

    @asynccontextmanager
    async def transaction(self) -> AsyncIterator[LogTransaction]:
        """Serialized write transaction; see EventStore.transaction."""
        async with self._lock:
            tx = LogTransaction(self._devices)
            yield tx
            if not tx.records:
                return
            text = "".join(encode_record(r) + "\n" for r in tx.records)
            await asyncio.to_thread(self._append, text)
            self._apply(tx.records)

    def _append(self, text: str) -> None:
        path = self._data_dir / log_file_name(self._clock())
        try:
            self._data_dir.mkdir(parents=True, exist_ok=True)
            with path.open("ab") as fh:
                start = fh.tell()
                try:
                    fh.write(text.encode("ascii"))
                    fh.flush()
                    if self._fsync:
                        os.fsync(fh.fileno())
                except OSError:
                    # Drop the partial payload so replay cannot resurrect it
                    fh.truncate(start)
                    raise
        except OSError as e:
            logger.error("Log append failed", file=path.name, error=str(e))
            raise StorageError(f"Append to {path.name} failed: {e}") from e

    def close(self) -> None:
        """Nothing is held open between appends."""

    # Replay

    @classmethod
    def replay(
        cls,
        data_dir: Path,
        fsync: bool = True,
        clock: Callable[[], datetime] = _utc_now,
    ) -> "LogEventStore":
        """Rebuild a store from the log files in data_dir.

        Corrupt lines (undecodable, or data for an unregistered device) are
        logged with file and line number and skipped.

        Raises:
            StorageError: The directory or a log file cannot be read.
        """
        store = cls(data_dir, fsync=fsync, clock=clock)
        if not data_dir.is_dir():
            raise StorageError(f"Data directory {data_dir} does not exist")

        loaded = 0
        for path in sorted(data_dir.glob(LOG_GLOB)):
            try:
                lines = path.read_bytes().decode("ascii", errors="replace").split("\n")
            except OSError as e:
                raise StorageError(f"Cannot read {path.name}: {e}") from e
            if lines and lines[-1] == "":
                lines.pop()
            for line_no, line in enumerate(lines, start=1):
                try:
                    record = store._replay_line(path.name, line_no, line)
                except CorruptLineError as e:
                    store.corrupt_lines += 1
                    logger.warning(
                        "Corrupt log line skipped",
                        file=e.file,
                        line_no=e.line_no,
                        error=str(e),
                    )
                    continue
                store._apply([record])
                loaded += 1

        logger.info(
            "Replay completed",
            data_dir=str(data_dir),
            records=loaded,
            corrupt=store.corrupt_lines,
        )
        return store

    def _replay_line(self, file: str, line_no: int, line: str) -> Record:
        try:
            record = decode_record(line)
        except CodecError as e:
            raise CorruptLineError(file, line_no, str(e)) from e
        if not isinstance(record, DeviceProfile) and record.device_id not in self._devices:
            raise CorruptLineError(file, line_no, str(UnknownDeviceError(record.device_id)))
        return record
