"""Geographic position type and great-circle distance."""

import math

import numpy as np
from pydantic import BaseModel, Field, field_validator

EARTH_RADIUS_KM = 6371.0088  # IUGG mean radius


class GeoPoint(BaseModel):
    """A position on the Earth's surface with altitude.

    Coordinates are rounded on construction to their canonical precision
    (6 fractional digits for lat/lon, 1 for altitude) so a point survives the
    text codec unchanged.
    """

    model_config = {"frozen": True}

    lat_deg: float = Field(..., ge=-90.0, le=90.0, allow_inf_nan=False)
    lon_deg: float = Field(..., ge=-180.0, le=180.0, allow_inf_nan=False)
    alt_m: float = Field(default=0.0, allow_inf_nan=False)

    @field_validator("lat_deg", "lon_deg", mode="after")
    @classmethod
    def _round_degrees(cls, v: float) -> float:
        return round(v, 6) + 0.0  # + 0.0 folds -0.0 into 0.0

    @field_validator("alt_m", mode="after")
    @classmethod
    def _round_altitude(cls, v: float) -> float:
        return round(v, 1) + 0.0


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in kilometers, ignoring altitude.

    Args:
        a: First point.
        b: Second point.

    Returns:
        Non-negative, symmetric distance using the IUGG mean Earth radius.
    """
    phi1 = math.radians(a.lat_deg)
    phi2 = math.radians(b.lat_deg)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon_deg - a.lon_deg)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_km_pairs(
    lat1: np.ndarray, lon1: np.ndarray, lat2: np.ndarray, lon2: np.ndarray
) -> np.ndarray:
    """Element-wise great-circle distances, same formula as haversine_km."""
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(lon2 - lon1)
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))
