"""Text codec for the SHWR1 record grammar.

One record per ``\\n``-terminated line::

    SHWR1|DEV|<device_id>|<model>|<mpx_tenths>|<sensitivity>
    SHWR1|EV|<device_id>|<t_local_ms>|<offset_ms>|<lat>|<lon>|<alt_m>|<magnitude>
    SHWR1|CO|<device_id>|<t_local_ms>|<offset_ms>|<lat>|<lon>|<co_ppm>
    SHWR1|ACC|<device_id>|<t0_local_ms>|<offset_ms>|<dt_ms>|<axis>|<s1;s2;...;sn>

Decoding applies the offset (``t_utc = t_local + offset``) so every decoded
record carries a UTC timestamp. Encoding writes the canonical offset 0 unless
a device clock offset is passed in.
"""

import math
import re
from collections.abc import Callable
from typing import Any

from pydantic import ValidationError

from cosmocrowd.analysis.timesync import normalize
from cosmocrowd.exceptions import BadFieldCountError, BadFieldValueError, BadMagicError
from cosmocrowd.models.geo import GeoPoint
from cosmocrowd.models.records import (
    DEVICE_ID_PATTERN,
    INT64_MAX,
    INT64_MIN,
    MIN_ACCEL_SAMPLES,
    MODEL_PATTERN,
    AccelWindow,
    Axis,
    DeviceProfile,
    FlashEvent,
    Record,
    TrackSample,
)

MAGIC = "SHWR1"
SEPARATOR = "|"

_INT_RE = re.compile(r"^-?[0-9]+$")
_DECIMAL_RE = re.compile(r"^-?[0-9]+(\.[0-9]+)?$")
_DEVICE_RE = re.compile(DEVICE_ID_PATTERN)

# Field names per record kind, in line order (index 0 is the magic)
FIELDS: dict[str, tuple[str, ...]] = {
    "DEV": ("magic", "kind", "device_id", "model", "mpx_tenths", "sensitivity"),
    "EV": (
        "magic", "kind", "device_id", "t_local_ms", "offset_ms",
        "lat", "lon", "alt_m", "magnitude",
    ),
    "CO": ("magic", "kind", "device_id", "t_local_ms", "offset_ms", "lat", "lon", "co_ppm"),
    "ACC": (
        "magic", "kind", "device_id", "t0_local_ms", "offset_ms", "dt_ms", "axis", "samples",
    ),
}


def format_sensitivity(value: float) -> str:
    """Shortest decimal with 1-4 fractional digits, e.g. ``1.0`` or ``0.85``."""
    text = f"{value:.4f}".rstrip("0")
    return text + "0" if text.endswith(".") else text


def encode_record(record: Record, offset_ms: int = 0) -> str:
    """Encode a record as one protocol line (without the newline).

    Args:
        record: A valid DeviceProfile, FlashEvent, TrackSample or AccelWindow.
        offset_ms: Device clock offset to write; the timestamp field then holds
            device-local time. 0 gives the canonical, already-normalized form.

    Returns:
        The line; deterministic byte output.
    """
    offset = str(offset_ms)
    if isinstance(record, DeviceProfile):
        parts = [
            "DEV",
            record.device_id,
            record.model,
            str(record.camera_mpx_tenths),
            format_sensitivity(record.sensitivity),
        ]
    elif isinstance(record, FlashEvent):
        parts = [
            "EV",
            record.device_id,
            str(record.t_utc_ms - offset_ms),
            offset,
            *_geo_fields(record.geo),
            str(record.magnitude),
        ]
    elif isinstance(record, TrackSample):
        g = record.geo
        parts = [
            "CO",
            record.device_id,
            str(record.t_utc_ms - offset_ms),
            offset,
            f"{g.lat_deg:.6f}",
            f"{g.lon_deg:.6f}",
            f"{record.co_ppm:.2f}",
        ]
    elif isinstance(record, AccelWindow):
        parts = [
            "ACC",
            record.device_id,
            str(record.t0_utc_ms - offset_ms),
            offset,
            str(record.dt_ms),
            record.axis.value,
            ";".join(f"{s:.4f}" for s in record.samples),
        ]
    else:
        raise TypeError(f"Cannot encode {type(record).__name__}")
    return SEPARATOR.join([MAGIC, *parts])


def _geo_fields(geo: GeoPoint) -> list[str]:
    return [f"{geo.lat_deg:.6f}", f"{geo.lon_deg:.6f}", f"{geo.alt_m:.1f}"]


class _Fields:
    """Positioned access to the split fields of one line."""

    def __init__(
        self,
        kind: str,
        parts: list[str],
        min_time_ms: int | None = None,
        max_time_ms: int | None = None,
    ):
        self.names = FIELDS[kind]
        self.parts = parts
        self.min_time_ms = INT64_MIN if min_time_ms is None else min_time_ms
        self.max_time_ms = INT64_MAX if max_time_ms is None else max_time_ms

    def raw(self, name: str) -> str:
        return self.parts[self.names.index(name)]

    def fail(self, name: str) -> BadFieldValueError:
        index = self.names.index(name)
        return BadFieldValueError(name, index, self.parts[index])

    def parse(self, name: str, convert: Callable[[str], Any], check=lambda v: True) -> Any:
        text = self.raw(name)
        try:
            value = convert(text)
        except ValueError:
            raise self.fail(name) from None
        if not check(value):
            raise self.fail(name)
        return value

    def integer(self, name: str, check=lambda v: True) -> int:
        return self.parse(name, _to_int, lambda v: INT64_MIN <= v <= INT64_MAX and check(v))

    def decimal(self, name: str, check=lambda v: True) -> float:
        return self.parse(name, _to_decimal, check)

    def device_id(self) -> str:
        return self.parse("device_id", str, lambda v: bool(_DEVICE_RE.match(v)))

    def utc(self, local_name: str) -> int:
        t_local = self.integer(local_name)
        offset = self.integer("offset_ms")
        t_utc = normalize(t_local, offset)
        if not self.min_time_ms <= t_utc <= self.max_time_ms:
            raise self.fail(local_name)
        return t_utc

    def geo(self, with_alt: bool) -> GeoPoint:
        lat = self.decimal("lat", lambda v: -90.0 <= v <= 90.0)
        lon = self.decimal("lon", lambda v: -180.0 <= v <= 180.0)
        alt = self.decimal("alt_m", math.isfinite) if with_alt else 0.0
        return GeoPoint(lat_deg=lat, lon_deg=lon, alt_m=alt)


def _to_int(text: str) -> int:
    if not _INT_RE.match(text):
        raise ValueError(text)
    return int(text)


def _to_decimal(text: str) -> float:
    if not _DECIMAL_RE.match(text):
        raise ValueError(text)
    return float(text)


def _to_samples(text: str) -> tuple[float, ...]:
    samples = tuple(_to_decimal(part) for part in text.split(";"))
    if len(samples) < MIN_ACCEL_SAMPLES:
        raise ValueError(text)
    return samples


def decode_record(
    line: str,
    min_time_ms: int | None = None,
    max_time_ms: int | None = None,
) -> Record:
    """Parse exactly one protocol line.

    Args:
        line: The line, with or without its terminating newline.
        min_time_ms: Earliest accepted UTC timestamp, unbounded when None.
        max_time_ms: Latest accepted UTC timestamp, unbounded when None.

    Returns:
        The decoded record, with timestamps normalized to UTC.

    Raises:
        BadMagicError: Line lacks the ``SHWR1|`` prefix.
        BadFieldCountError: Wrong number of fields for the record kind.
        BadFieldValueError: First malformed or out-of-range field.
    """
    if line.endswith("\n"):
        line = line[:-1]
    if not line.startswith(MAGIC + SEPARATOR):
        raise BadMagicError()

    parts = line.split(SEPARATOR)
    kind = parts[1]
    if kind not in FIELDS:
        raise BadFieldValueError("kind", 1, kind)
    expected = len(FIELDS[kind])
    if len(parts) != expected:
        raise BadFieldCountError(kind, expected, len(parts))

    fields = _Fields(kind, parts, min_time_ms, max_time_ms)
    try:
        return _DECODERS[kind](fields)
    except ValidationError as exc:
        # Reason: Model invariants not covered by the per-field checks above
        # still get reported against a field of the line.
        loc = str(exc.errors()[0]["loc"][0]) if exc.errors() else "kind"
        name = _MODEL_TO_FIELD.get(loc, "kind")
        raise fields.fail(name) from None


_MODEL_TO_FIELD = {
    "device_id": "device_id",
    "model": "model",
    "camera_mpx_tenths": "mpx_tenths",
    "sensitivity": "sensitivity",
    "t_utc_ms": "t_local_ms",
    "t0_utc_ms": "t0_local_ms",
    "geo": "lat",
    "lat_deg": "lat",
    "lon_deg": "lon",
    "alt_m": "alt_m",
    "magnitude": "magnitude",
    "co_ppm": "co_ppm",
    "dt_ms": "dt_ms",
    "axis": "axis",
    "samples": "samples",
}


def _decode_dev(f: _Fields) -> DeviceProfile:
    return DeviceProfile(
        device_id=f.device_id(),
        model=f.parse("model", str, lambda v: bool(MODEL_PATTERN.match(v))),
        camera_mpx_tenths=f.integer("mpx_tenths", lambda v: v >= 0),
        sensitivity=f.decimal("sensitivity", lambda v: math.isfinite(v) and round(v, 4) > 0),
    )


def _decode_ev(f: _Fields) -> FlashEvent:
    device_id = f.device_id()
    t_utc = f.utc("t_local_ms")
    geo = f.geo(with_alt=True)
    return FlashEvent(
        device_id=device_id,
        t_utc_ms=t_utc,
        geo=geo,
        magnitude=f.integer("magnitude", lambda v: v >= 1),
    )


def _decode_co(f: _Fields) -> TrackSample:
    device_id = f.device_id()
    t_utc = f.utc("t_local_ms")
    geo = f.geo(with_alt=False)
    return TrackSample(
        device_id=device_id,
        t_utc_ms=t_utc,
        geo=geo,
        co_ppm=f.decimal("co_ppm", lambda v: math.isfinite(v) and v >= 0),
    )


def _decode_acc(f: _Fields) -> AccelWindow:
    device_id = f.device_id()
    t0_utc = f.utc("t0_local_ms")
    return AccelWindow(
        device_id=device_id,
        t0_utc_ms=t0_utc,
        dt_ms=f.integer("dt_ms", lambda v: v > 0),
        axis=f.parse("axis", Axis),
        samples=f.parse("samples", _to_samples),
    )


_DECODERS: dict[str, Callable[[_Fields], Record]] = {
    "DEV": _decode_dev,
    "EV": _decode_ev,
    "CO": _decode_co,
    "ACC": _decode_acc,
}

