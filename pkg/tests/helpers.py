"""Record builders shared by the tests."""

from cosmocrowd.models.geo import GeoPoint
from cosmocrowd.models.records import DeviceProfile, FlashEvent, TrackSample

KYIV_CENTER = (50.45, 30.52)


def make_device(device_id: str = "dev1", sensitivity: float = 1.0) -> DeviceProfile:
    return DeviceProfile(
        device_id=device_id, model="NEXUS7", camera_mpx_tenths=12, sensitivity=sensitivity
    )


def make_event(
    device_id: str = "dev1",
    t_utc_ms: int = 1_394_450_000_000,
    lat: float = KYIV_CENTER[0],
    lon: float = KYIV_CENTER[1],
    magnitude: int = 1,
    alt_m: float = 0.0,
) -> FlashEvent:
    return FlashEvent(
        device_id=device_id,
        t_utc_ms=t_utc_ms,
        geo=GeoPoint(lat_deg=lat, lon_deg=lon, alt_m=alt_m),
        magnitude=magnitude,
    )


def make_sample(
    device_id: str = "dev1",
    t_utc_ms: int = 0,
    co_ppm: float = 10.0,
    lat: float = KYIV_CENTER[0],
    lon: float = KYIV_CENTER[1],
) -> TrackSample:
    return TrackSample(
        device_id=device_id,
        t_utc_ms=t_utc_ms,
        geo=GeoPoint(lat_deg=lat, lon_deg=lon),
        co_ppm=co_ppm,
    )
