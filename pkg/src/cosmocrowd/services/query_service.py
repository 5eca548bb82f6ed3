"""Read-only queries over a store snapshot.

Shared by the HTTP endpoints and the CLI subcommands; every function takes an
immutable StoreSnapshot, so concurrent ingestion never changes a running query.
"""

import structlog
from pydantic import BaseModel

from cosmocrowd.analysis.activity import (
    ActivityClass,
    ActivityModel,
    MomentVector,
    classify,
    compute_moments,
)
from cosmocrowd.analysis.coincidence import CoincidenceParams, ShowerCandidate, detect
from cosmocrowd.analysis.exposure import (
    BBox,
    GridKind,
    GridMap,
    accumulate_dose,
    build_grid,
    drop_repeated_samples,
)
from cosmocrowd.analysis.ratestats import RateSeries, bin_events, fit_baseline, flag_spikes
from cosmocrowd.exceptions import BadParameterError, ZeroVarianceError
from cosmocrowd.models.geo import GeoPoint
from cosmocrowd.models.records import Axis
from cosmocrowd.storage.base import StoreSnapshot

logger = structlog.get_logger()


class DoseReport(BaseModel):
    device: str
    dose_ppm_s: float
    samples: int


class WindowMoments(BaseModel):
    """Moments of one accelerometer window, with its class when a model is loaded."""

    t0_utc_ms: int
    axis: Axis
    moments: MomentVector | None = None
    activity: ActivityClass | None = None
    error: str | None = None


def _require_device(snapshot: StoreSnapshot, device_id: str) -> None:
    # Raw log files may carry data lines without a DEV line
    known = (
        device_id in snapshot.devices
        or bool(snapshot.flash_events(device_id))
        or bool(snapshot.track_samples(device_id))
        or bool(snapshot.accel_windows(device_id))
    )
    if not known:
        raise BadParameterError(f"Unknown device: {device_id}")


def device_series(
    snapshot: StoreSnapshot,
    device_id: str,
    bin_s: int,
    window_bins: int,
    k: float = 5.0,
    mad_floor: float = 0.5,
    from_ms: int | None = None,
    to_ms: int | None = None,
    normalize: bool = False,
    max_bins: int = 200_000,
) -> RateSeries:
    """Binned, baselined and spike-flagged series for one device.

    Without an explicit range the series spans from the first event (floored
    to a bin boundary) through the last one.

    Raises:
        BadParameterError: Unknown device, or the range spans more than
            ``max_bins`` bins.
        BadRangeError, BadWindowError: Invalid binning parameters.
    """
    _require_device(snapshot, device_id)
    events = snapshot.flash_events(device_id)
    bin_ms = max(bin_s, 1) * 1000
    if from_ms is None:
        from_ms = (events[0].t_utc_ms // bin_ms) * bin_ms if events else 0
    if to_ms is None:
        to_ms = events[-1].t_utc_ms + 1 if events else from_ms + bin_ms
    n_bins = -(-(to_ms - from_ms) // bin_ms)
    if n_bins > max_bins:
        raise BadParameterError(
            f"Series of {n_bins} bins exceeds the limit of {max_bins}; "
            "narrow the range or widen bin_s"
        )

    profile = snapshot.devices.get(device_id)
    sensitivity = profile.sensitivity if normalize and profile else 1.0
    series = bin_events(events, bin_s, from_ms, to_ms, device_id=device_id, sensitivity=sensitivity)
    return flag_spikes(fit_baseline(series, window_bins), k=k, mad_floor=mad_floor)


def find_candidates(
    snapshot: StoreSnapshot,
    params: CoincidenceParams,
    from_ms: int | None = None,
    to_ms: int | None = None,
) -> list[ShowerCandidate]:
    return detect(snapshot.flash_events(from_ms=from_ms, to_ms=to_ms), params)


def shower_map(
    snapshot: StoreSnapshot,
    params: CoincidenceParams,
    bbox: BBox,
    cell_km: float,
) -> GridMap:
    """Candidate epicenters per cell; cell values are candidate multiplicities."""
    candidates = find_candidates(snapshot, params)
    return build_grid(
        ((c.epicenter, float(c.multiplicity)) for c in candidates),
        bbox,
        cell_km,
        kind=GridKind.SHOWER_COUNT,
    )


def pollution_map(snapshot: StoreSnapshot, bbox: BBox, cell_km: float) -> GridMap:
    return build_grid(
        ((s.geo, s.co_ppm) for s in snapshot.track_samples()),
        bbox,
        cell_km,
        kind=GridKind.CO_PPM,
    )


def last_positions(snapshot: StoreSnapshot) -> dict[str, GeoPoint]:
    """Latest known position of each device from its flash and track records."""
    latest: dict[str, tuple[int, GeoPoint]] = {}
    for record in [*snapshot.flash_events(), *snapshot.track_samples()]:
        seen = latest.get(record.device_id)
        if seen is None or record.t_utc_ms >= seen[0]:
            latest[record.device_id] = (record.t_utc_ms, record.geo)
    return {device_id: geo for device_id, (_, geo) in sorted(latest.items())}


def height_map(snapshot: StoreSnapshot, bbox: BBox, cell_km: float) -> GridMap:
    """Altitude of every device at its last known position."""
    return build_grid(
        ((geo, geo.alt_m) for geo in last_positions(snapshot).values()),
        bbox,
        cell_km,
        kind=GridKind.ALT_M,
    )


def device_dose(snapshot: StoreSnapshot, device_id: str, max_gap_s: float) -> DoseReport:
    """Accumulated CO dose along one device's track.

    Raises:
        BadParameterError: Unknown device.
        UnorderedTrackError: Two different readings share a timestamp.
    """
    _require_device(snapshot, device_id)
    track = drop_repeated_samples(snapshot.track_samples(device_id))
    return DoseReport(
        device=device_id,
        dose_ppm_s=accumulate_dose(track, max_gap_s=max_gap_s),
        samples=len(track),
    )


def device_moments(
    snapshot: StoreSnapshot,
    device_id: str,
    model: ActivityModel | None = None,
) -> list[WindowMoments]:
    """Moment vectors of every accelerometer window of one device.

    Windows without variance are reported with their error code instead of
    moments.
    """
    _require_device(snapshot, device_id)
    results = []
    for window in snapshot.accel_windows(device_id):
        try:
            moments = compute_moments(window)
        except ZeroVarianceError as e:
            logger.debug(
                "Accel window without variance", device_id=device_id, t0_utc_ms=window.t0_utc_ms
            )
            results.append(
                WindowMoments(t0_utc_ms=window.t0_utc_ms, axis=window.axis, error=e.code)
            )
            continue
        results.append(
            WindowMoments(
                t0_utc_ms=window.t0_utc_ms,
                axis=window.axis,
                moments=moments,
                activity=classify(model, moments) if model else None,
            )
        )
    return results
