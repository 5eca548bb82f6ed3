"""Tests for coincidence detection."""

import random
from collections import deque

import pytest

from cosmocrowd.analysis.coincidence import (
    CoincidenceParams,
    ShowerCandidate,
    candidate_rate,
    candidate_to_json,
    dedupe_candidates,
    detect,
    event_key,
)
from cosmocrowd.exceptions import BadRangeError
from cosmocrowd.models.geo import haversine_km
from cosmocrowd.models.records import FlashEvent
from tests.helpers import KYIV_CENTER, make_event

LAT, LON = KYIV_CENTER


def test_two_devices_close_in_time_and_space() -> None:
    a = make_event("A", t_utc_ms=0)
    b = make_event("B", t_utc_ms=400, lat=LAT + 0.8 / 111.1949)

    candidates = detect([a, b])

    assert len(candidates) == 1
    assert candidates[0].multiplicity == 2
    assert candidates[0].t0_utc_ms == 0
    assert candidates[0].span_ms == 400
    assert candidates[0].span_km == pytest.approx(0.8, abs=1e-3)


def test_temporal_gap_splits_events() -> None:
    candidates = detect([make_event("A", t_utc_ms=0), make_event("B", t_utc_ms=1500)])

    assert candidates == []


def test_window_boundary_is_inclusive() -> None:
    candidates = detect([make_event("A", t_utc_ms=0), make_event("B", t_utc_ms=1000)])

    assert len(candidates) == 1


def test_one_device_is_not_a_shower() -> None:
    candidates = detect([make_event("A", t_utc_ms=0), make_event("A", t_utc_ms=100)])

    assert candidates == []


def test_far_apart_devices_are_not_linked() -> None:
    far = make_event("B", t_utc_ms=100, lat=LAT + 0.1)

    assert detect([make_event("A", t_utc_ms=0), far]) == []


def test_linkage_chains_through_intermediate_events() -> None:
    events = [make_event(d, t_utc_ms=t) for d, t in (("A", 0), ("B", 900), ("C", 1800))]

    candidates = detect(events)

    assert len(candidates) == 1
    assert candidates[0].multiplicity == 3
    assert candidates[0].span_ms == 1800


def test_min_devices_threshold() -> None:
    events = [make_event("A", t_utc_ms=0), make_event("B", t_utc_ms=10)]

    assert detect(events, CoincidenceParams(min_devices=3)) == []


def test_epicenter_is_magnitude_weighted_centroid() -> None:
    a = make_event("A", t_utc_ms=0, lon=30.52, magnitude=2)
    b = make_event("B", t_utc_ms=10, lon=30.54, magnitude=2)

    (candidate,) = detect([a, b])

    assert candidate.epicenter.lon_deg == 30.53
    assert candidate.epicenter.lat_deg == LAT


def test_candidate_to_json() -> None:
    (candidate,) = detect([make_event("A", t_utc_ms=5), make_event("B", t_utc_ms=25)])

    assert candidate_to_json(candidate) == {
        "t0_utc_ms": 5,
        "multiplicity": 2,
        "span_ms": 20,
        "span_km": 0.0,
        "epicenter": {"lat": LAT, "lon": LON, "alt": 0.0},
        "member_count": 2,
    }


def test_candidate_rate() -> None:
    hour = 3_600_000
    candidates = [
        ShowerCandidate(members=(make_event(t_utc_ms=i * 1_000_000),)) for i in range(6)
    ]

    assert candidate_rate(candidates, 0, 2 * hour) == 3.0
    assert candidate_rate([], 0, hour) == 0.0
    assert candidate_rate(candidates, 10 * hour, 11 * hour) == 0.0
    with pytest.raises(BadRangeError):
        candidate_rate(candidates, hour, hour)


def test_dedupe_drops_repeats_from_overlapping_runs() -> None:
    events = [make_event("A", t_utc_ms=0), make_event("B", t_utc_ms=10)]
    once = detect(events)

    assert dedupe_candidates(once + detect(events)) == once


def test_params_validation() -> None:
    with pytest.raises(ValueError):
        CoincidenceParams(window_s=0)
    with pytest.raises(ValueError):
        CoincidenceParams(min_devices=1)


# --- Brute-force oracle ---


def _oracle(events: list[FlashEvent], params: CoincidenceParams) -> list[tuple]:
    """Connected components of the all-pairs link graph, as sorted member keys."""
    n = len(events)
    window_ms = params.window_s * 1000.0

    def linked(a: FlashEvent, b: FlashEvent) -> bool:
        if abs(a.t_utc_ms - b.t_utc_ms) > window_ms:
            return False
        return haversine_km(a.geo, b.geo) <= params.radius_km

    seen = [False] * n
    result = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        component, queue = [], deque([start])
        while queue:
            i = queue.popleft()
            component.append(events[i])
            for j in range(n):
                if not seen[j] and linked(events[i], events[j]):
                    seen[j] = True
                    queue.append(j)
        if len({e.device_id for e in component}) >= params.min_devices:
            result.append(tuple(sorted(event_key(e) for e in component)))
    return sorted(result)


def _random_instance(rng: random.Random) -> tuple[list[FlashEvent], CoincidenceParams]:
    params = CoincidenceParams(
        window_s=rng.uniform(0.2, 3.0),
        radius_km=rng.uniform(0.3, 5.0),
        min_devices=rng.randint(2, 4),
    )
    devices = [f"d{i}" for i in range(rng.randint(1, 10))]
    events = [
        make_event(
            rng.choice(devices),
            t_utc_ms=rng.randint(0, 30_000),
            lat=LAT + rng.uniform(-0.05, 0.05),
            lon=LON + rng.uniform(-0.05, 0.05),
            magnitude=rng.randint(1, 5),
        )
        for _ in range(rng.randint(0, 200))
    ]
    return events, params


def test_detect_matches_all_pairs_oracle() -> None:
    rng = random.Random(500)

    for _ in range(500):
        events, params = _random_instance(rng)

        candidates = detect(events, params)

        assert sorted(c.member_keys for c in candidates) == _oracle(events, params)
        shuffled = events[:]
        rng.shuffle(shuffled)
        assert detect(shuffled, params) == candidates


def test_candidates_are_ordered_by_start_time() -> None:
    events, params = _random_instance(random.Random(3))

    candidates = detect(events, params)

    assert [c.t0_utc_ms for c in candidates] == sorted(c.t0_utc_ms for c in candidates)


def _covered(events: list[FlashEvent], params: CoincidenceParams) -> set[tuple]:
    return {key for c in detect(events, params) for key in c.member_keys}


def test_wider_thresholds_never_uncover_events() -> None:
    rng = random.Random(1000)

    for _ in range(200):
        events, params = _random_instance(rng)
        wider_window = params.model_copy(update={"window_s": params.window_s * rng.uniform(1, 3)})
        wider_radius = params.model_copy(
            update={"radius_km": params.radius_km * rng.uniform(1, 3)}
        )

        covered = _covered(events, params)

        assert covered <= _covered(events, wider_window)
        assert covered <= _covered(events, wider_radius)
