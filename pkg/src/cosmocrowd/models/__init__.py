"""Models package."""

from cosmocrowd.models.geo import EARTH_RADIUS_KM, GeoPoint, haversine_km, haversine_km_pairs
from cosmocrowd.models.records import (
    AccelWindow,
    Axis,
    DeviceProfile,
    FlashEvent,
    Record,
    TrackSample,
)

__all__ = [
    "EARTH_RADIUS_KM",
    "GeoPoint",
    "haversine_km",
    "haversine_km_pairs",
    "AccelWindow",
    "Axis",
    "DeviceProfile",
    "FlashEvent",
    "Record",
    "TrackSample",
]
