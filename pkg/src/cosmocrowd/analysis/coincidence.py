"""Multi-device coincidence detection of air-shower candidates.

Events are sorted, cut into temporal chains wherever the gap to the previous
event exceeds the window, and clustered inside each chain by single linkage:
two events are linked when they are at most ``window_s`` apart in time and at
most ``radius_km`` apart on the ground. Clusters seen by enough distinct
devices become candidates.
"""

from collections.abc import Iterable, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, Field, computed_field
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from cosmocrowd.exceptions import BadRangeError
from cosmocrowd.models.geo import GeoPoint, haversine_km, haversine_km_pairs
from cosmocrowd.models.records import FlashEvent

logger = structlog.get_logger()

MS_PER_HOUR = 3_600_000


class CoincidenceParams(BaseModel):
    """Linking thresholds for coincidence detection."""

    model_config = {"frozen": True}

    window_s: float = Field(default=1.0, gt=0, description="Max time gap between linked events")
    radius_km: float = Field(default=2.0, gt=0, description="Max distance between linked events")
    min_devices: int = Field(default=2, ge=2, description="Min distinct devices per candidate")

    @property
    def window_ms(self) -> float:
        return self.window_s * 1000.0


def event_key(e: FlashEvent) -> tuple:
    """Total order on events; the first three fields are the detection sort key."""
    return (e.t_utc_ms, e.device_id, e.magnitude, e.geo.lat_deg, e.geo.lon_deg, e.geo.alt_m)


class ShowerCandidate(BaseModel):
    """A cluster of near-simultaneous flashes from several devices."""

    model_config = {"frozen": True}

    members: tuple[FlashEvent, ...]

    @computed_field
    @property
    def t0_utc_ms(self) -> int:
        return self.members[0].t_utc_ms

    @computed_field
    @property
    def multiplicity(self) -> int:
        return len({m.device_id for m in self.members})

    @computed_field
    @property
    def member_count(self) -> int:
        return len(self.members)

    @computed_field
    @property
    def span_ms(self) -> int:
        return self.members[-1].t_utc_ms - self.members[0].t_utc_ms

    @computed_field
    @property
    def span_km(self) -> float:
        if len(self.members) < 2:
            return 0.0
        return max(
            haversine_km(a.geo, b.geo)
            for i, a in enumerate(self.members)
            for b in self.members[i + 1 :]
        )

    @computed_field
    @property
    def epicenter(self) -> GeoPoint:
        """Magnitude-weighted mean of member positions."""
        weights = np.array([m.magnitude for m in self.members], dtype=float)
        lat = np.array([m.geo.lat_deg for m in self.members])
        lon = np.array([m.geo.lon_deg for m in self.members])
        alt = np.array([m.geo.alt_m for m in self.members])
        return GeoPoint(
            lat_deg=float(np.average(lat, weights=weights)),
            lon_deg=float(np.average(lon, weights=weights)),
            alt_m=float(np.average(alt, weights=weights)),
        )

    @property
    def member_keys(self) -> tuple[tuple, ...]:
        return tuple(event_key(m) for m in self.members)


def _temporal_chains(events: Sequence[FlashEvent], window_ms: float) -> list[Sequence[FlashEvent]]:
    chains: list[Sequence[FlashEvent]] = []
    start = 0
    for i in range(1, len(events)):
        if events[i].t_utc_ms - events[i - 1].t_utc_ms > window_ms:
            chains.append(events[start:i])
            start = i
    if events:
        chains.append(events[start:])
    return chains


def _time_pairs(t: np.ndarray, window_ms: float) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i < j) of a time-sorted array with t[j] - t[i] <= window_ms."""
    n = len(t)
    ends = np.searchsorted(t, t + window_ms, side="right")
    per_i = ends - np.arange(n) - 1
    total = int(per_i.sum())
    i_idx = np.repeat(np.arange(n), per_i)
    starts = np.repeat(np.cumsum(per_i) - per_i, per_i)
    j_idx = i_idx + 1 + (np.arange(total) - starts)
    return i_idx, j_idx


def _link_components(chain: Sequence[FlashEvent], params: CoincidenceParams) -> list[list[int]]:
    n = len(chain)
    t = np.array([e.t_utc_ms for e in chain], dtype=np.int64)
    lat = np.array([e.geo.lat_deg for e in chain])
    lon = np.array([e.geo.lon_deg for e in chain])

    i_idx, j_idx = _time_pairs(t, params.window_ms)
    close = haversine_km_pairs(lat[i_idx], lon[i_idx], lat[j_idx], lon[j_idx]) <= params.radius_km
    graph = csr_matrix(
        (np.ones(int(close.sum()), dtype=bool), (i_idx[close], j_idx[close])), shape=(n, n)
    )
    n_comp, labels = connected_components(graph, directed=False)
    groups: list[list[int]] = [[] for _ in range(n_comp)]
    for idx, label in enumerate(labels):
        groups[label].append(idx)
    return groups


def detect(
    events: Iterable[FlashEvent],
    params: CoincidenceParams | None = None,
) -> list[ShowerCandidate]:
    """Find air-shower candidates among flash events.

    The result depends only on the multiset of events, not their input order.

    Args:
        events: Flash events with UTC timestamps (any order, may be empty).
        params: Linking thresholds; defaults when None.

    Returns:
        Candidates ordered by t0, then by their first member.
    """
    params = params or CoincidenceParams()
    ordered = sorted(events, key=event_key)

    candidates: list[ShowerCandidate] = []
    for chain in _temporal_chains(ordered, params.window_ms):
        if len(chain) < params.min_devices:
            continue
        if len({e.device_id for e in chain}) < params.min_devices:
            continue
        for group in _link_components(chain, params):
            members = [chain[i] for i in group]
            if len({m.device_id for m in members}) >= params.min_devices:
                candidates.append(ShowerCandidate(members=tuple(members)))

    candidates.sort(key=lambda c: (c.t0_utc_ms, c.member_keys[0]))
    logger.debug("Coincidence detection finished", events=len(ordered), candidates=len(candidates))
    return candidates


def candidate_rate(
    candidates: Iterable[ShowerCandidate],
    t_start_ms: int,
    t_end_ms: int,
) -> float:
    """Candidates per hour with t0 in [t_start_ms, t_end_ms).

    Raises:
        BadRangeError: t_end_ms <= t_start_ms.
    """
    if t_end_ms <= t_start_ms:
        raise BadRangeError(f"Empty range [{t_start_ms}, {t_end_ms})")
    n = sum(1 for c in candidates if t_start_ms <= c.t0_utc_ms < t_end_ms)
    return n / ((t_end_ms - t_start_ms) / MS_PER_HOUR)


def dedupe_candidates(candidates: Iterable[ShowerCandidate]) -> list[ShowerCandidate]:
    """Drop repeats (same t0 and member set) from overlapping detection runs."""
    seen: set[tuple] = set()
    unique: list[ShowerCandidate] = []
    for c in sorted(candidates, key=lambda c: (c.t0_utc_ms, c.member_keys)):
        key = (c.t0_utc_ms, c.member_keys)
        if key not in seen:
            seen.add(key)
            unique.append(c)
    return unique


def candidate_to_json(c: ShowerCandidate) -> dict:
    """Summary form written by `detect` and served by /v1/candidates."""
    return {
        "t0_utc_ms": c.t0_utc_ms,
        "multiplicity": c.multiplicity,
        "span_ms": c.span_ms,
        "span_km": round(c.span_km, 6),
        "epicenter": {
            "lat": c.epicenter.lat_deg,
            "lon": c.epicenter.lon_deg,
            "alt": c.epicenter.alt_m,
        },
        "member_count": c.member_count,
    }
