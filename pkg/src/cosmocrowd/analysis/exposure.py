"""Personal exposure dose along a track and spatial grid maps.

Dose uses zero-order hold: each reading is held until the next sample, with
the hold capped at ``max_gap_s`` so a lost signal cannot dominate the sum.
Grids are equirectangular cells of roughly ``cell_km`` on a side.
"""

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import geojson

from cosmocrowd.exceptions import BadBBoxError, UnorderedTrackError
from cosmocrowd.models.geo import GeoPoint
from cosmocrowd.models.records import TrackSample

KM_PER_DEG_LAT = 111.1949


class GridKind(StrEnum):
    """What the values aggregated in a grid measure."""

    CO_PPM = "co_ppm"
    SHOWER_COUNT = "shower_count"
    ALT_M = "alt_m"


@dataclass(frozen=True)
class BBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self) -> None:
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise BadBBoxError(f"Invalid bbox {self.as_tuple()}")
        if not (-90 <= self.lat_min and self.lat_max <= 90):
            raise BadBBoxError("Latitude bounds must be within [-90, 90]")
        if not (-180 <= self.lon_min and self.lon_max <= 180):
            raise BadBBoxError("Longitude bounds must be within [-180, 180]")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.lat_min, self.lat_max, self.lon_min, self.lon_max)

    def contains(self, p: GeoPoint) -> bool:
        return self.lat_min <= p.lat_deg < self.lat_max and self.lon_min <= p.lon_deg < self.lon_max


@dataclass(frozen=True)
class GridCell:
    count: int
    mean: float
    max: float

    def merge(self, other: "GridCell") -> "GridCell":
        count = self.count + other.count
        mean = (self.count * self.mean + other.count * other.mean) / count
        return GridCell(count=count, mean=mean, max=max(self.max, other.max))


@dataclass(frozen=True)
class GridMap:
    """Aggregated values per cell; only non-empty cells are stored."""

    bbox: BBox
    cell_km: float
    kind: GridKind
    cells: dict[tuple[int, int], GridCell] = field(default_factory=dict)
    dropped: int = 0

    @property
    def dlat(self) -> float:
        return cell_degrees(self.bbox, self.cell_km)[0]

    @property
    def dlon(self) -> float:
        return cell_degrees(self.bbox, self.cell_km)[1]

    @property
    def total_count(self) -> int:
        return sum(c.count for c in self.cells.values())

    def to_geojson(self) -> geojson.FeatureCollection:
        """One Polygon feature per non-empty cell, ordered by (row, col)."""
        dlat, dlon = cell_degrees(self.bbox, self.cell_km)
        features = []
        for (i, j), cell in sorted(self.cells.items()):
            lat0 = self.bbox.lat_min + i * dlat
            lon0 = self.bbox.lon_min + j * dlon
            ring = [
                (lon0, lat0),
                (lon0 + dlon, lat0),
                (lon0 + dlon, lat0 + dlat),
                (lon0, lat0 + dlat),
                (lon0, lat0),
            ]
            features.append(
                geojson.Feature(
                    geometry=geojson.Polygon([ring]),
                    properties={
                        "count": cell.count,
                        "mean": cell.mean,
                        "max": cell.max,
                        "kind": self.kind.value,
                    },
                )
            )
        return geojson.FeatureCollection(features)


def drop_repeated_samples(track: Sequence[TrackSample]) -> list[TrackSample]:
    """Track without exact repeats of a sample, first occurrence kept.

    A device that resubmits a payload stores each CO line twice; two different
    readings at one timestamp are left in place.
    """
    return list(dict.fromkeys(track))


def accumulate_dose(track: Sequence[TrackSample], max_gap_s: float = 300.0) -> float:
    """Zero-order-hold dose in ppm·s.

    Each sample's concentration is held until the next sample, for at most
    ``max_gap_s``; the last sample contributes nothing.

    Raises:
        UnorderedTrackError: Timestamps are not strictly increasing.
    """
    max_gap_ms = max_gap_s * 1000.0
    dose_ppm_ms = 0.0
    for prev, nxt in zip(track, track[1:]):
        dt_ms = nxt.t_utc_ms - prev.t_utc_ms
        if dt_ms <= 0:
            raise UnorderedTrackError(
                f"Track not strictly increasing at t={nxt.t_utc_ms} (previous {prev.t_utc_ms})"
            )
        dose_ppm_ms += prev.co_ppm * min(dt_ms, max_gap_ms)
    return dose_ppm_ms / 1000.0


def cell_degrees(bbox: BBox, cell_km: float) -> tuple[float, float]:
    """Cell edge in degrees (Δlat, Δlon) at the bbox's middle latitude."""
    lat_mid = math.radians((bbox.lat_min + bbox.lat_max) / 2)
    return cell_km / KM_PER_DEG_LAT, cell_km / (KM_PER_DEG_LAT * math.cos(lat_mid))


def build_grid(
    samples: Iterable[tuple[GeoPoint, float]],
    bbox: BBox | tuple[float, float, float, float],
    cell_km: float,
    kind: GridKind = GridKind.CO_PPM,
) -> GridMap:
    """Aggregate (position, value) samples into cells of the bbox.

    Samples outside the bbox are counted in ``dropped``.

    Raises:
        BadBBoxError: Invalid bbox or non-positive cell size.
    """
    if not isinstance(bbox, BBox):
        bbox = BBox(*bbox)
    if not cell_km > 0:
        raise BadBBoxError(f"cell_km must be positive, got {cell_km}")
    if abs(bbox.lat_min + bbox.lat_max) / 2 >= 90:
        raise BadBBoxError("Grid cannot be centered on a pole")

    dlat, dlon = cell_degrees(bbox, cell_km)
    acc: dict[tuple[int, int], tuple[int, float, float]] = {}
    dropped = 0
    for point, value in samples:
        if not bbox.contains(point):
            dropped += 1
            continue
        key = (
            math.floor((point.lat_deg - bbox.lat_min) / dlat),
            math.floor((point.lon_deg - bbox.lon_min) / dlon),
        )
        count, total, peak = acc.get(key, (0, 0.0, -math.inf))
        acc[key] = (count + 1, total + value, max(peak, value))

    cells = {
        key: GridCell(count=count, mean=min(total / count, peak), max=peak)
        for key, (count, total, peak) in acc.items()
    }
    return GridMap(bbox=bbox, cell_km=cell_km, kind=kind, cells=cells, dropped=dropped)


def merge_grids(a: GridMap, b: GridMap) -> GridMap:
    """Combine grids built over disjoint sample sets with the same layout."""
    if (a.bbox, a.cell_km, a.kind) != (b.bbox, b.cell_km, b.kind):
        raise BadBBoxError("Only grids with identical bbox, cell size and kind can be merged")
    cells = dict(a.cells)
    for key, cell in b.cells.items():
        cells[key] = cells[key].merge(cell) if key in cells else cell
    return GridMap(
        bbox=a.bbox,
        cell_km=a.cell_km,
        kind=a.kind,
        cells=cells,
        dropped=a.dropped + b.dropped,
    )
