"""Deterministic simulator of a volunteer device fleet.

Static devices register a Poisson background whose rate follows a daily cycle
peaking at 15:00 local time; injected showers add one near-simultaneous flash
on every device inside their footprint. Each device carries a fixed clock
offset that is written into its EV lines, so ingestion has to normalize them.

Draw order (part of the determinism contract): device positions and offsets,
then background events device by device, then showers.
"""

import math
from collections.abc import Callable, Sequence
from typing import Any

import structlog
from pydantic import BaseModel, Field, ValidationError, model_validator

from cosmocrowd.analysis.coincidence import ShowerCandidate
from cosmocrowd.analysis.exposure import BBox
from cosmocrowd.analysis.ratestats import AltitudeModel
from cosmocrowd.exceptions import BadBBoxError, BadConfigError
from cosmocrowd.models.geo import GeoPoint, haversine_km
from cosmocrowd.models.records import DeviceProfile, FlashEvent
from cosmocrowd.parsers.protocol import encode_record
from cosmocrowd.sim.rng import SplitMix64

logger = structlog.get_logger()

MS_PER_HOUR = 3_600_000
MS_PER_MINUTE = 60_000
DIURNAL_PEAK_HOUR = 15.0
MAGNITUDE_P = 0.5
SIM_MODEL = "SIMPHONE"
SIM_MPX_TENTHS = 12

# Flight profile phases as fractions of the duration: ground, ascent, cruise, descent, ground
FLIGHT_PHASES = (0.1, 0.2, 0.4, 0.2, 0.1)


class SimConfig(BaseModel):
    """Simulation parameters; build through make_config to get BadConfigError."""

    model_config = {"frozen": True}

    n_devices: int = Field(default=50, ge=0)
    bbox: tuple[float, float, float, float] = (50.35, 50.55, 30.35, 30.70)
    duration_h: float = Field(default=24.0, gt=0)
    background_cpm: float = Field(default=5.0, gt=0, description="Per-device rate at sensitivity 1")
    diurnal_amplitude: float = Field(default=0.3, ge=0, lt=1)
    n_showers: int = Field(default=20, ge=0)
    shower_footprint_km: float = Field(default=1.0, gt=0)
    shower_jitter_ms: int = Field(default=200, ge=0)
    clock_offset_range_ms: int = Field(default=5000, ge=0)
    seed: int = Field(default=0, ge=0, le=2**64 - 1)
    start_utc_ms: int = Field(default=1_394_409_600_000, ge=0, description="2014-03-10T00:00Z")
    tz_offset_h: float = Field(default=2.0, ge=-14, le=14)
    flight_sensitivities: tuple[float, float] = (1.0, 2.0)

    @model_validator(mode="after")
    def _check(self) -> "SimConfig":
        try:
            BBox(*self.bbox)
        except BadBBoxError as e:
            raise ValueError(str(e)) from e
        if any(s <= 0 for s in self.flight_sensitivities):
            raise ValueError("flight sensitivities must be positive")
        return self

    @property
    def duration_ms(self) -> int:
        return round(self.duration_h * MS_PER_HOUR)

    @property
    def end_utc_ms(self) -> int:
        return self.start_utc_ms + self.duration_ms


def make_config(**kwargs: Any) -> SimConfig:
    """Validated SimConfig.

    Raises:
        BadConfigError: A parameter is out of range.
    """
    try:
        return SimConfig(**kwargs)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors()
        )
        raise BadConfigError(problems) from None


class InjectedShower(BaseModel):
    t_true_ms: int
    lat: float
    lon: float
    devices: list[str]


class GroundTruth(BaseModel):
    """Showers injected by a simulation, serialized as the sidecar JSON."""

    showers: list[InjectedShower] = Field(default_factory=list)

    def epicenter(self, index: int) -> GeoPoint:
        s = self.showers[index]
        return GeoPoint(lat_deg=s.lat, lon_deg=s.lon)


class SimResult(BaseModel):
    lines: list[str]
    truth: GroundTruth

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)


class _SimDevice(BaseModel):
    profile: DeviceProfile
    geo: GeoPoint
    offset_ms: int


def diurnal_cpm(config: SimConfig, t_utc_ms: float) -> float:
    """Background rate at a UTC instant, peaking at 15:00 local time."""
    local_h = (t_utc_ms / MS_PER_HOUR + config.tz_offset_h) % 24.0
    phase = 2 * math.pi * (local_h - DIURNAL_PEAK_HOUR) / 24.0
    return config.background_cpm * (1.0 + config.diurnal_amplitude * math.cos(phase))


def _magnitude(rng: SplitMix64) -> int:
    return 1 + rng.geometric(MAGNITUDE_P)


def _thinned_times(
    rng: SplitMix64,
    start_ms: int,
    end_ms: int,
    peak_cpm: float,
    rate_cpm: Callable[[float], float],
) -> list[tuple[int, int]]:
    """(t_utc_ms, magnitude) of an inhomogeneous Poisson process by thinning."""
    out = []
    rate_per_ms = peak_cpm / MS_PER_MINUTE
    t = float(start_ms)
    while True:
        t += rng.exponential(rate_per_ms)
        if t >= end_ms:
            return out
        if rng.next_float() * peak_cpm < rate_cpm(t):
            out.append((math.floor(t), _magnitude(rng)))


def _place_devices(rng: SplitMix64, config: SimConfig) -> list[_SimDevice]:
    lat_min, lat_max, lon_min, lon_max = config.bbox
    devices = []
    for i in range(config.n_devices):
        lat = rng.uniform(lat_min, lat_max)
        lon = rng.uniform(lon_min, lon_max)
        offset = rng.randint(-config.clock_offset_range_ms, config.clock_offset_range_ms)
        devices.append(
            _SimDevice(
                profile=DeviceProfile(
                    device_id=f"sim{i:04d}",
                    model=SIM_MODEL,
                    camera_mpx_tenths=SIM_MPX_TENTHS,
                    sensitivity=1.0,
                ),
                geo=GeoPoint(lat_deg=lat, lon_deg=lon),
                offset_ms=offset,
            )
        )
    return devices


def _render(
    profiles: Sequence[DeviceProfile], events: list[FlashEvent], offsets: dict[str, int]
) -> list[str]:
    lines = [encode_record(p) for p in profiles]
    events.sort(key=lambda e: (e.t_utc_ms, e.device_id, e.magnitude))
    lines += [encode_record(e, offset_ms=offsets[e.device_id]) for e in events]
    return lines


def simulate(config: SimConfig) -> SimResult:
    """Generate protocol lines and ground truth for a static fleet.

    Returns:
        DEV lines for every device followed by EV lines in UTC order, plus the
        injected showers.
    """
    rng = SplitMix64(config.seed)
    devices = _place_devices(rng, config)
    start, end = config.start_utc_ms, config.end_utc_ms
    peak = config.background_cpm * (1.0 + config.diurnal_amplitude)

    events: list[FlashEvent] = []
    for d in devices:
        device_id = d.profile.device_id
        for t, magnitude in _thinned_times(rng, start, end, peak, lambda t: diurnal_cpm(config, t)):
            events.append(
                FlashEvent(device_id=device_id, t_utc_ms=t, geo=d.geo, magnitude=magnitude)
            )
    n_background = len(events)

    truth = GroundTruth()
    lat_min, lat_max, lon_min, lon_max = config.bbox
    for _ in range(config.n_showers):
        t_true = start + math.floor(rng.uniform(0, config.duration_ms))
        epicenter = GeoPoint(
            lat_deg=rng.uniform(lat_min, lat_max), lon_deg=rng.uniform(lon_min, lon_max)
        )
        hit = [d for d in devices if haversine_km(d.geo, epicenter) <= config.shower_footprint_km]
        for d in hit:
            jitter = round(rng.uniform(-config.shower_jitter_ms, config.shower_jitter_ms))
            events.append(
                FlashEvent(
                    device_id=d.profile.device_id,
                    t_utc_ms=t_true + jitter,
                    geo=d.geo,
                    magnitude=_magnitude(rng),
                )
            )
        truth.showers.append(
            InjectedShower(
                t_true_ms=t_true,
                lat=epicenter.lat_deg,
                lon=epicenter.lon_deg,
                devices=[d.profile.device_id for d in hit],
            )
        )

    offsets = {d.profile.device_id: d.offset_ms for d in devices}
    logger.info(
        "Fleet simulated",
        seed=config.seed,
        devices=len(devices),
        background_events=n_background,
        shower_events=len(events) - n_background,
        showers=len(truth.showers),
    )
    lines = _render([d.profile for d in devices], events, offsets)
    return SimResult(lines=lines, truth=truth)


def flight_altitude_km(config: SimConfig, t_utc_ms: float, ascent_to_km: float = 9.0) -> float:
    """Scripted flight altitude: ground, linear ascent, cruise, linear descent, ground."""
    f = (t_utc_ms - config.start_utc_ms) / config.duration_ms
    ground, ascent, cruise, descent, _ = FLIGHT_PHASES
    if f < ground or f >= ground + ascent + cruise + descent:
        return 0.0
    f -= ground
    if f < ascent:
        return ascent_to_km * f / ascent
    f -= ascent
    if f < cruise:
        return ascent_to_km
    f -= cruise
    return ascent_to_km * (1.0 - f / descent)


def flight_profile(
    config: SimConfig,
    model: AltitudeModel,
    ascent_to_km: float = 9.0,
) -> list[str]:
    """Protocol lines of two co-located devices carried through a flight.

    Each device's rate is ``model.rate(h)`` times its sensitivity; there is no
    daily cycle. Devices sit at the bbox center.

    Raises:
        BadConfigError: ascent_to_km is not positive.
    """
    if not ascent_to_km > 0:
        raise BadConfigError(f"ascent_to_km must be positive, got {ascent_to_km}")

    rng = SplitMix64(config.seed)
    lat_min, lat_max, lon_min, lon_max = config.bbox
    center_lat, center_lon = (lat_min + lat_max) / 2, (lon_min + lon_max) / 2
    profiles = [
        DeviceProfile(
            device_id=f"flight{i}",
            model=SIM_MODEL,
            camera_mpx_tenths=SIM_MPX_TENTHS,
            sensitivity=sensitivity,
        )
        for i, sensitivity in enumerate(config.flight_sensitivities)
    ]
    offsets = {
        p.device_id: rng.randint(-config.clock_offset_range_ms, config.clock_offset_range_ms)
        for p in profiles
    }

    def alt_km(t: float) -> float:
        return flight_altitude_km(config, t, ascent_to_km)

    events: list[FlashEvent] = []
    for p in profiles:
        peak = model.rate(ascent_to_km) * p.sensitivity
        for t, magnitude in _thinned_times(
            rng,
            config.start_utc_ms,
            config.end_utc_ms,
            peak,
            lambda t, s=p.sensitivity: model.rate(alt_km(t)) * s,
        ):
            geo = GeoPoint(lat_deg=center_lat, lon_deg=center_lon, alt_m=alt_km(t) * 1000.0)
            events.append(
                FlashEvent(device_id=p.device_id, t_utc_ms=t, geo=geo, magnitude=magnitude)
            )

    logger.info("Flight simulated", seed=config.seed, events=len(events))
    return _render(profiles, events, offsets)


class EvaluationReport(BaseModel):
    precision: float
    recall: float
    matches: list[tuple[int, int]] = Field(
        default_factory=list, description="(candidate index, truth index) pairs"
    )


def evaluate(
    candidates: Sequence[ShowerCandidate],
    truth: GroundTruth,
    match_window_s: float = 2.0,
    match_radius_km: float = 2.0,
) -> EvaluationReport:
    """Greedy one-to-one matching of candidates to injected showers.

    Candidates are taken in t0 order; each matches the unmatched shower
    closest in time among those within the window and radius (ties: lower
    shower index).
    """
    window_ms = match_window_s * 1000.0
    order = sorted(range(len(candidates)), key=lambda i: candidates[i].t0_utc_ms)
    unmatched = set(range(len(truth.showers)))
    matches = []
    for ci in order:
        c = candidates[ci]
        epicenter = c.epicenter
        best: tuple[float, int] | None = None
        for ti in sorted(unmatched):
            dt = abs(c.t0_utc_ms - truth.showers[ti].t_true_ms)
            if dt > window_ms or haversine_km(epicenter, truth.epicenter(ti)) > match_radius_km:
                continue
            if best is None or dt < best[0]:
                best = (dt, ti)
        if best is not None:
            unmatched.discard(best[1])
            matches.append((ci, best[1]))

    precision = len(matches) / len(candidates) if candidates else 1.0
    recall = len(matches) / len(truth.showers) if truth.showers else 1.0
    return EvaluationReport(precision=precision, recall=recall, matches=sorted(matches))
