"""API routes for cosmocrowd.

Provides the ingestion endpoint and read-only query endpoints over the
collected records.
"""

from typing import TypeVar

import structlog
from fastapi import APIRouter, Depends, FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field
from starlette.exceptions import HTTPException as StarletteHTTPException

from cosmocrowd.analysis.activity import ActivityModel
from cosmocrowd.analysis.coincidence import CoincidenceParams, candidate_to_json
from cosmocrowd.analysis.exposure import BBox
from cosmocrowd.analysis.ratestats import series_to_csv
from cosmocrowd.config.settings import Settings, settings
from cosmocrowd.exceptions import (
    BadParameterError,
    CrowdError,
    QueryError,
    StorageError,
    UnknownEndpointError,
)
from cosmocrowd.services import query_service
from cosmocrowd.services.ingest_service import IngestReport, ingest_lines
from cosmocrowd.services.query_service import DoseReport, WindowMoments
from cosmocrowd.storage.base import EventStore, StoreSnapshot

logger = structlog.get_logger()

T = TypeVar("T")

router = APIRouter(prefix="/v1", tags=["crowd"])

# Service instances (initialized on app startup)
_store: EventStore | None = None
_activity_model: ActivityModel | None = None
_settings: Settings = settings


def init_store(store: EventStore, app_settings: Settings) -> None:
    """Initialize API services.

    Must be called before API routes can be used.

    Args:
        store: Record store the endpoints read from and append to.
        app_settings: Settings for the ingest time range, default map area and
            activity model.
    """
    global _store, _activity_model, _settings
    _store = store
    _settings = app_settings
    _activity_model = None
    if app_settings.activity_model_path:
        try:
            _activity_model = ActivityModel.load(app_settings.activity_model_path)
            logger.info("Activity model loaded", path=str(app_settings.activity_model_path))
        except (OSError, ValueError) as e:
            # Moments are still served, just without classes
            logger.warning("Activity model not loaded", error=str(e))


def get_store() -> EventStore:
    """Get store instance."""
    if _store is None:
        raise RuntimeError("Services not initialized. Call init_store first.")
    return _store


def get_snapshot(store: EventStore = Depends(get_store)) -> StoreSnapshot:
    """Snapshot taken once at request start."""
    return store.snapshot()


def _or_setting(value: T | None, name: str) -> T:
    """Query value, or the named setting of the running app when omitted."""
    return getattr(_settings, name) if value is None else value


# Response models


class HealthResponse(BaseModel):
    """Health check response."""

    status: str
    devices: int = Field(..., description="Registered devices")
    events: int = Field(..., description="Stored flash, track and accelerometer records")


class DeviceResponse(BaseModel):
    device_id: str
    model: str
    camera_mpx_tenths: int
    sensitivity: float


class MapQuery(BaseModel):
    """Optional bbox override shared by the map endpoints."""

    lat_min: float | None = None
    lat_max: float | None = None
    lon_min: float | None = None
    lon_max: float | None = None

    def bbox(self) -> BBox:
        given = (self.lat_min, self.lat_max, self.lon_min, self.lon_max)
        if all(v is None for v in given):
            return BBox(*_settings.map_bbox)
        if any(v is None for v in given):
            raise BadParameterError("bbox needs all of lat_min, lat_max, lon_min, lon_max")
        return BBox(*given)  # type: ignore[arg-type]


# Routes


@router.post("/ingest", response_model=IngestReport)
async def ingest(request: Request, store: EventStore = Depends(get_store)) -> IngestReport:
    """Ingest protocol lines from a text body."""
    body = await request.body()
    # Non-ASCII bytes become U+FFFD and fail per line in the codec
    payload = body.decode("ascii", errors="replace")
    return await ingest_lines(
        store,
        payload,
        min_time_ms=_settings.min_time_ms,
        max_time_ms=_settings.max_time_ms,
    )


@router.get("/healthz", response_model=HealthResponse)
async def healthz(snapshot: StoreSnapshot = Depends(get_snapshot)) -> HealthResponse:
    """Health check endpoint."""
    return HealthResponse(status="ok", devices=len(snapshot.devices), events=snapshot.n_events)


@router.get("/devices", response_model=list[DeviceResponse])
async def list_devices(snapshot: StoreSnapshot = Depends(get_snapshot)) -> list[DeviceResponse]:
    return [
        DeviceResponse(**snapshot.devices[device_id].model_dump())
        for device_id in sorted(snapshot.devices)
    ]


@router.get("/series", response_class=PlainTextResponse)
async def series(
    device: str,
    bin_s: int | None = Query(default=None, ge=1),
    from_ms: int | None = None,
    to_ms: int | None = None,
    window_bins: int | None = Query(default=None, description="Odd, >= 3"),
    k: float | None = Query(default=None, gt=0),
    mad_floor: float | None = Query(default=None, gt=0),
    normalize: bool = False,
    snapshot: StoreSnapshot = Depends(get_snapshot),
) -> PlainTextResponse:
    """Rate series CSV (bin_start_ms,counts,cpm,baseline,spike) for one device."""
    bin_s = _or_setting(bin_s, "bin_s")
    result = query_service.device_series(
        snapshot,
        device,
        bin_s=bin_s,
        window_bins=window_bins or _settings.baseline_window_bins(bin_s),
        k=_or_setting(k, "spike_k"),
        mad_floor=_or_setting(mad_floor, "spike_mad_floor"),
        from_ms=from_ms,
        to_ms=to_ms,
        normalize=normalize,
        max_bins=_settings.max_series_bins,
    )
    return PlainTextResponse(series_to_csv(result), media_type="text/csv")


def _coincidence_params(
    window_s: float | None = Query(default=None, gt=0),
    radius_km: float | None = Query(default=None, gt=0),
    min_devices: int | None = Query(default=None, ge=2),
) -> CoincidenceParams:
    return CoincidenceParams(
        window_s=_or_setting(window_s, "coincidence_window_s"),
        radius_km=_or_setting(radius_km, "coincidence_radius_km"),
        min_devices=_or_setting(min_devices, "coincidence_min_devices"),
    )


@router.get("/candidates")
async def candidates(
    from_ms: int | None = None,
    to_ms: int | None = None,
    params: CoincidenceParams = Depends(_coincidence_params),
    snapshot: StoreSnapshot = Depends(get_snapshot),
) -> list[dict]:
    """Shower candidates as a JSON array ordered by t0."""
    found = query_service.find_candidates(snapshot, params, from_ms=from_ms, to_ms=to_ms)
    return [candidate_to_json(c) for c in found]


@router.get("/map/showers")
async def map_showers(
    cell_km: float | None = Query(default=None, gt=0),
    area: MapQuery = Depends(),
    params: CoincidenceParams = Depends(_coincidence_params),
    snapshot: StoreSnapshot = Depends(get_snapshot),
) -> dict:
    cell_km = _or_setting(cell_km, "showers_cell_km")
    grid = query_service.shower_map(snapshot, params, area.bbox(), cell_km)
    return dict(grid.to_geojson())


@router.get("/map/pollution")
async def map_pollution(
    cell_km: float | None = Query(default=None, gt=0),
    area: MapQuery = Depends(),
    snapshot: StoreSnapshot = Depends(get_snapshot),
) -> dict:
    cell_km = _or_setting(cell_km, "pollution_cell_km")
    grid = query_service.pollution_map(snapshot, area.bbox(), cell_km)
    return dict(grid.to_geojson())


@router.get("/map/heights")
async def map_heights(
    cell_km: float | None = Query(default=None, gt=0),
    area: MapQuery = Depends(),
    snapshot: StoreSnapshot = Depends(get_snapshot),
) -> dict:
    """Last known device altitudes per cell."""
    cell_km = _or_setting(cell_km, "showers_cell_km")
    grid = query_service.height_map(snapshot, area.bbox(), cell_km)
    return dict(grid.to_geojson())


@router.get("/dose", response_model=DoseReport)
async def dose(
    device: str,
    max_gap_s: float | None = Query(default=None, gt=0),
    snapshot: StoreSnapshot = Depends(get_snapshot),
) -> DoseReport:
    return query_service.device_dose(snapshot, device, _or_setting(max_gap_s, "dose_max_gap_s"))


@router.get("/moments", response_model=list[WindowMoments])
async def moments(
    device: str,
    snapshot: StoreSnapshot = Depends(get_snapshot),
) -> list[WindowMoments]:
    return query_service.device_moments(snapshot, device, _activity_model)


# Error handling


def _error_body(code: str, detail: str, status_code: int) -> JSONResponse:
    return JSONResponse(status_code=status_code, content={"error": code, "detail": detail})


def register_error_handlers(app: FastAPI) -> None:
    """Answer every failure with a ``{"error": code, "detail": text}`` body.

    Reason: Clients of the ingest daemon branch on the machine-readable code,
    never on FastAPI's default error shapes.
    """

    @app.exception_handler(StarletteHTTPException)
    async def http_error(request: Request, exc: StarletteHTTPException) -> JSONResponse:
        if exc.status_code == 404:
            err = UnknownEndpointError(f"No endpoint {request.method} {request.url.path}")
            return _error_body(err.code, str(err), err.status_code)
        return _error_body("http_error", str(exc.detail), exc.status_code)

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError) -> JSONResponse:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in e['loc'][1:])}: {e['msg']}" for e in exc.errors()
        )
        return _error_body(BadParameterError.code, problems, BadParameterError.status_code)

    @app.exception_handler(QueryError)
    async def query_error(request: Request, exc: QueryError) -> JSONResponse:
        return _error_body(exc.code, str(exc), exc.status_code)

    @app.exception_handler(StorageError)
    async def storage_error(request: Request, exc: StorageError) -> JSONResponse:
        logger.error("Request failed on storage", path=request.url.path, error=str(exc))
        return _error_body(exc.code, str(exc), 500)

    @app.exception_handler(CrowdError)
    async def domain_error(request: Request, exc: CrowdError) -> JSONResponse:
        # Analysis errors raised by query parameters (bad window, bad bbox, ...)
        return _error_body(BadParameterError.code, f"{exc.code}: {exc}", 400)
