"""Abstract event store interface using Protocol.

Defines the contract for record stores and the immutable snapshot view that
queries operate on.
"""

from collections.abc import Iterable, Mapping, Sequence
from contextlib import AbstractAsyncContextManager
from dataclasses import dataclass
from typing import Protocol

from cosmocrowd.models.records import AccelWindow, DeviceProfile, FlashEvent, Record, TrackSample
from cosmocrowd.parsers.protocol import encode_record


@dataclass(frozen=True)
class StoreSnapshot:
    """Read-only view of the store at one instant.

    Reason: The store's record lists are append-only, so a snapshot only needs
    the list references and their lengths at the time it was taken; later
    appends stay invisible to it.
    """

    devices: Mapping[str, DeviceProfile]
    _flashes: Sequence[FlashEvent]
    _tracks: Sequence[TrackSample]
    _accels: Sequence[AccelWindow]
    n_flashes: int
    n_tracks: int
    n_accels: int

    @classmethod
    def from_records(cls, records: Iterable[Record]) -> "StoreSnapshot":
        """Snapshot over a plain record sequence (e.g. a log file read by the CLI).

        Later DEV records replace earlier ones for the same device.
        """
        devices: dict[str, DeviceProfile] = {}
        flashes: list[FlashEvent] = []
        tracks: list[TrackSample] = []
        accels: list[AccelWindow] = []
        for r in records:
            if isinstance(r, DeviceProfile):
                devices[r.device_id] = r
            elif isinstance(r, FlashEvent):
                flashes.append(r)
            elif isinstance(r, TrackSample):
                tracks.append(r)
            else:
                accels.append(r)
        return cls(
            devices=devices,
            _flashes=flashes,
            _tracks=tracks,
            _accels=accels,
            n_flashes=len(flashes),
            n_tracks=len(tracks),
            n_accels=len(accels),
        )

    @property
    def n_events(self) -> int:
        return self.n_flashes + self.n_tracks + self.n_accels

    def flash_events(
        self,
        device_id: str | None = None,
        from_ms: int | None = None,
        to_ms: int | None = None,
    ) -> list[FlashEvent]:
        """Flash events sorted by (t_utc_ms, magnitude, insertion order).

        Args:
            device_id: Restrict to one device.
            from_ms: Inclusive lower time bound.
            to_ms: Exclusive upper time bound.
        """
        events = [
            e
            for e in self._flashes[: self.n_flashes]
            if (device_id is None or e.device_id == device_id)
            and (from_ms is None or e.t_utc_ms >= from_ms)
            and (to_ms is None or e.t_utc_ms < to_ms)
        ]
        return sorted(events, key=lambda e: (e.t_utc_ms, e.magnitude))

    def track_samples(self, device_id: str | None = None) -> list[TrackSample]:
        """Track samples sorted by time (insertion order on ties)."""
        samples = [
            s
            for s in self._tracks[: self.n_tracks]
            if device_id is None or s.device_id == device_id
        ]
        return sorted(samples, key=lambda s: s.t_utc_ms)

    def accel_windows(self, device_id: str | None = None) -> list[AccelWindow]:
        """Accelerometer windows sorted by start time."""
        windows = [
            w
            for w in self._accels[: self.n_accels]
            if device_id is None or w.device_id == device_id
        ]
        return sorted(windows, key=lambda w: w.t0_utc_ms)

    def canonical_lines(self) -> list[str]:
        """Every stored record as a canonical line, devices first."""
        lines = [encode_record(d) for d in self.devices.values()]
        lines += [encode_record(r) for r in self._flashes[: self.n_flashes]]
        lines += [encode_record(r) for r in self._tracks[: self.n_tracks]]
        lines += [encode_record(r) for r in self._accels[: self.n_accels]]
        return lines


class StoreTransaction(Protocol):
    """Records staged by one payload; published together on commit."""

    def is_registered(self, device_id: str) -> bool:
        """Whether the device is known to the store or staged in this payload."""
        ...

    def add(self, record: DeviceProfile | FlashEvent | TrackSample | AccelWindow) -> None:
        """Stage a record for the commit."""
        ...


class EventStore(Protocol):
    """Record store abstraction protocol.

    Reason: Using Protocol instead of ABC allows more flexible implementations
    while maintaining strict type checking.
    """

    accepted_total: int
    rejected_total: int

    def transaction(self) -> AbstractAsyncContextManager[StoreTransaction]:
        """Open a serialized write transaction.

        Staged records are durably appended on exit and then become visible to
        snapshots all at once.

        Raises:
            StorageError: The append failed; nothing was published.
        """
        ...

    def snapshot(self) -> StoreSnapshot:
        """Immutable view of the currently visible records."""
        ...

    def close(self) -> None:
        """Release file handles."""
        ...
