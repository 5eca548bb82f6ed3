"""Record types submitted by volunteer devices.

These are the four record kinds of the wire/persistence grammar. All are
immutable; timestamps are integer milliseconds since the Unix epoch (UTC).
"""

import math
import re
from enum import StrEnum
from typing import Annotated

from pydantic import BaseModel, Field, StringConstraints, field_validator

from cosmocrowd.models.geo import GeoPoint

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

DEVICE_ID_PATTERN = r"^[A-Za-z0-9_-]{1,64}$"
MODEL_PATTERN = re.compile(r"^[\x20-\x7b\x7d\x7e]{1,64}$")  # printable ASCII minus '|'

DeviceId = Annotated[str, StringConstraints(pattern=DEVICE_ID_PATTERN)]
TimestampMs = Annotated[int, Field(ge=INT64_MIN, le=INT64_MAX)]

MIN_ACCEL_SAMPLES = 8


class Axis(StrEnum):
    """Accelerometer channel of a window."""

    X = "x"
    Y = "y"
    Z = "z"
    MAG = "mag"


class DeviceProfile(BaseModel):
    """Registration record of a volunteer device."""

    model_config = {"frozen": True}

    device_id: DeviceId
    model: str = Field(..., description="Free-text model name, printable ASCII without '|'")
    camera_mpx_tenths: int = Field(..., ge=0, description="Camera megapixels x 10")
    sensitivity: float = Field(
        default=1.0,
        gt=0,
        allow_inf_nan=False,
        description="Relative counts per unit flux (1.0 = reference device)",
    )

    @field_validator("model")
    @classmethod
    def _check_model(cls, v: str) -> str:
        if not MODEL_PATTERN.match(v):
            raise ValueError("model must be 1-64 printable ASCII characters without '|'")
        return v

    @field_validator("sensitivity", mode="after")
    @classmethod
    def _round_sensitivity(cls, v: float) -> float:
        rounded = round(v, 4)
        if rounded <= 0:
            raise ValueError("sensitivity must stay positive at 4 fractional digits")
        return rounded


class FlashEvent(BaseModel):
    """One radiometric detection: a bright-pixel cluster on a shielded camera."""

    model_config = {"frozen": True}

    device_id: DeviceId
    t_utc_ms: TimestampMs
    geo: GeoPoint
    magnitude: int = Field(..., ge=1, description="Bright-pixel cluster size")


class TrackSample(BaseModel):
    """Geo-located gas concentration reading."""

    model_config = {"frozen": True}

    device_id: DeviceId
    t_utc_ms: TimestampMs
    geo: GeoPoint
    co_ppm: float = Field(..., ge=0, allow_inf_nan=False)

    @field_validator("co_ppm", mode="after")
    @classmethod
    def _round_ppm(cls, v: float) -> float:
        return round(v, 2) + 0.0


class AccelWindow(BaseModel):
    """A window of equally spaced accelerometer samples on one axis."""

    model_config = {"frozen": True}

    device_id: DeviceId
    t0_utc_ms: TimestampMs
    dt_ms: int = Field(..., gt=0)
    axis: Axis
    samples: tuple[float, ...] = Field(..., min_length=MIN_ACCEL_SAMPLES)

    @field_validator("samples", mode="after")
    @classmethod
    def _round_samples(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if not all(math.isfinite(s) for s in v):
            raise ValueError("samples must be finite")
        return tuple(round(s, 4) + 0.0 for s in v)


Record = DeviceProfile | FlashEvent | TrackSample | AccelWindow
