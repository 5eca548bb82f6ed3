"""Tests for the ingest and query endpoints."""

import logging
from collections.abc import Iterator
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from cosmocrowd.analysis.activity import ActivityClass, ActivityModel, Normalization
from cosmocrowd.config.settings import Settings
from cosmocrowd.main import HealthCheckFilter, create_app
from cosmocrowd.storage.log_store import LogEventStore

T0 = 1394450000000


def ev(device_id: str, t_ms: int, lat: str = "50.450000", lon: str = "30.520000") -> str:
    return f"SHWR1|EV|{device_id}|{t_ms}|0|{lat}|{lon}|0.0|1"


def dev(device_id: str, sensitivity: str = "1.0") -> str:
    return f"SHWR1|DEV|{device_id}|NEXUS7|12|{sensitivity}"


@pytest.fixture
def client(store: LogEventStore) -> Iterator[TestClient]:
    with TestClient(create_app(store=store)) as test_client:
        yield test_client


def post_lines(client: TestClient, *lines: str) -> dict:
    response = client.post("/v1/ingest", content="\n".join(lines) + "\n")
    assert response.status_code == 200
    return response.json()


def test_healthz_on_empty_store(client: TestClient) -> None:
    response = client.get("/v1/healthz")

    assert response.status_code == 200
    assert response.json() == {"status": "ok", "devices": 0, "events": 0}


def test_ingest_reports_accepted_and_rejected(client: TestClient) -> None:
    report = post_lines(client, dev("A"), ev("A", T0), "garbage", ev("ghost", T0))

    assert report["accepted"] == 2
    assert [(r["line"], r["error"]) for r in report["rejected"]] == [
        (3, "bad_magic"),
        (4, "unknown_device"),
    ]
    assert client.get("/v1/healthz").json() == {"status": "ok", "devices": 1, "events": 1}


def test_ingest_of_non_ascii_bytes(client: TestClient) -> None:
    response = client.post("/v1/ingest", content="SHWR1|DEV|d\xe9v|M|1|1.0".encode("latin-1"))

    assert response.json()["rejected"][0]["error"] == "bad_field_value"


def test_devices_are_listed_in_id_order(client: TestClient) -> None:
    post_lines(client, dev("B", "0.85"), dev("A"))

    devices = client.get("/v1/devices").json()

    assert [d["device_id"] for d in devices] == ["A", "B"]
    assert devices[1]["sensitivity"] == 0.85


def test_series_csv(client: TestClient) -> None:
    post_lines(client, dev("A"), ev("A", 0), ev("A", 10_000), ev("A", 65_000))

    response = client.get("/v1/series", params={"device": "A", "bin_s": 60, "window_bins": 3})

    assert response.status_code == 200
    assert response.headers["content-type"].startswith("text/csv")
    rows = response.text.splitlines()
    assert rows[0] == "bin_start_ms,counts,cpm,baseline,spike"
    assert [row.split(",")[1] for row in rows[1:]] == ["2", "1"]


def test_series_for_unknown_device(client: TestClient) -> None:
    response = client.get("/v1/series", params={"device": "ghost"})

    assert response.status_code == 400
    assert response.json() == {"error": "bad_parameter", "detail": "Unknown device: ghost"}


def test_series_with_even_window(client: TestClient) -> None:
    post_lines(client, dev("A"), ev("A", 0))

    response = client.get("/v1/series", params={"device": "A", "window_bins": 4})

    assert response.status_code == 400
    assert response.json()["detail"].startswith("bad_window")


def test_missing_parameter_is_a_bad_parameter(client: TestClient) -> None:
    response = client.get("/v1/dose")

    assert response.status_code == 400
    assert response.json()["error"] == "bad_parameter"


def test_candidates(client: TestClient) -> None:
    post_lines(client, dev("A"), dev("B"), ev("A", T0), ev("B", T0 + 400, lat="50.457195"))

    response = client.get("/v1/candidates")

    (candidate,) = response.json()
    assert candidate["t0_utc_ms"] == T0
    assert candidate["multiplicity"] == 2
    assert candidate["span_ms"] == 400


def test_candidates_respect_query_thresholds(client: TestClient) -> None:
    post_lines(client, dev("A"), dev("B"), ev("A", T0), ev("B", T0 + 400))

    assert client.get("/v1/candidates", params={"window_s": 0.2}).json() == []
    assert client.get("/v1/candidates", params={"min_devices": 1}).status_code == 400


def test_unknown_endpoint(client: TestClient) -> None:
    response = client.get("/v1/nothing")

    assert response.status_code == 404
    assert response.json() == {
        "error": "unknown_endpoint",
        "detail": "No endpoint GET /v1/nothing",
    }


def test_shower_map(client: TestClient) -> None:
    post_lines(client, dev("A"), dev("B"), ev("A", T0), ev("B", T0 + 100))

    collection = client.get("/v1/map/showers").json()

    assert collection["type"] == "FeatureCollection"
    (feature,) = collection["features"]
    assert feature["properties"]["kind"] == "shower_count"
    assert feature["properties"]["max"] == 2.0


def test_pollution_map_with_explicit_bbox(client: TestClient) -> None:
    post_lines(client, dev("A"), "SHWR1|CO|A|0|0|10.100000|10.100000|7.5")
    bbox = {"lat_min": 10.0, "lat_max": 10.5, "lon_min": 10.0, "lon_max": 10.5}

    default_area = client.get("/v1/map/pollution").json()
    explicit = client.get("/v1/map/pollution", params=bbox).json()

    assert default_area["features"] == []
    assert explicit["features"][0]["properties"]["mean"] == 7.5


def test_partial_bbox_is_rejected(client: TestClient) -> None:
    response = client.get("/v1/map/pollution", params={"lat_min": 10.0})

    assert response.status_code == 400
    assert response.json()["error"] == "bad_parameter"


def test_height_map(client: TestClient) -> None:
    post_lines(client, dev("A"), "SHWR1|EV|A|0|0|50.450000|30.520000|9000.0|1")

    (feature,) = client.get("/v1/map/heights").json()["features"]

    assert feature["properties"]["kind"] == "alt_m"
    assert feature["properties"]["max"] == 9000.0


def test_dose(client: TestClient) -> None:
    post_lines(
        client,
        dev("A"),
        "SHWR1|CO|A|0|0|50.450000|30.520000|10.00",
        "SHWR1|CO|A|1800000|0|50.450000|30.520000|20.00",
        "SHWR1|CO|A|3600000|0|50.450000|30.520000|0.00",
    )

    response = client.get("/v1/dose", params={"device": "A", "max_gap_s": 3600})

    assert response.json() == {"device": "A", "dose_ppm_s": 54000.0, "samples": 3}


def test_dose_after_resubmitted_payload(client: TestClient) -> None:
    payload = (
        dev("A"),
        "SHWR1|CO|A|0|0|50.450000|30.520000|10.00",
        "SHWR1|CO|A|3600000|0|50.450000|30.520000|0.00",
    )
    post_lines(client, *payload)
    post_lines(client, *payload)

    response = client.get("/v1/dose", params={"device": "A", "max_gap_s": 3600})

    assert response.status_code == 200
    assert response.json() == {"device": "A", "dose_ppm_s": 36000.0, "samples": 2}


def test_moments(client: TestClient) -> None:
    post_lines(
        client,
        dev("A"),
        "SHWR1|ACC|A|0|0|20|z|-1.0;1.0;-1.0;1.0;-1.0;1.0;-1.0;1.0",
        "SHWR1|ACC|A|1000|0|20|z|2.0;2.0;2.0;2.0;2.0;2.0;2.0;2.0",
    )

    body = client.get("/v1/moments", params={"device": "A"}).json()

    assert body[0]["moments"] == {
        "mean": 0.0,
        "std": 1.0,
        "skewness": 0.0,
        "kurtosis_excess": -2.0,
    }
    assert body[0]["activity"] is None
    assert body[1]["error"] == "zero_variance"


def test_moments_classified_with_configured_model(tmp_path: Path, data_dir: Path) -> None:
    model_path = tmp_path / "activity.json"
    ActivityModel(
        norm=Normalization(mean=[0.0, 0.0, 0.0], std=[1.0, 1.0, 1.0]),
        centroids={
            ActivityClass.PASSIVE: [1.0, 0.0, -2.0],
            ActivityClass.MODERATE: [5.0, 0.0, 0.0],
            ActivityClass.ACTIVE: [9.0, 0.0, 0.0],
        },
    ).save(model_path)
    app_settings = Settings(data_dir=data_dir, fsync_appends=False, activity_model_path=model_path)

    with TestClient(create_app(app_settings)) as client:
        post_lines(client, dev("A"), "SHWR1|ACC|A|0|0|20|x|-1.0;1.0;-1.0;1.0;-1.0;1.0;-1.0;1.0")
        body = client.get("/v1/moments", params={"device": "A"}).json()

    assert body[0]["activity"] == "passive"


def test_records_survive_app_restart(data_dir: Path) -> None:
    app_settings = Settings(data_dir=data_dir, fsync_appends=False)

    with TestClient(create_app(app_settings)) as client:
        post_lines(client, dev("A"), ev("A", T0))

    with TestClient(create_app(app_settings)) as client:
        assert client.get("/v1/healthz").json()["events"] == 1


def test_query_defaults_follow_app_settings(data_dir: Path) -> None:
    app_settings = Settings(
        data_dir=data_dir,
        fsync_appends=False,
        coincidence_window_s=0.2,
        dose_max_gap_s=60.0,
        bin_s=120,
        max_series_bins=10,
    )
    samples = (
        "SHWR1|CO|A|0|0|50.450000|30.520000|10.00",
        "SHWR1|CO|A|3600000|0|50.450000|30.520000|0.00",
    )

    with TestClient(create_app(app_settings)) as client:
        post_lines(client, dev("A"), dev("B"), ev("A", T0), ev("B", T0 + 400), *samples)

        assert client.get("/v1/candidates").json() == []
        assert len(client.get("/v1/candidates", params={"window_s": 1.0}).json()) == 1
        assert client.get("/v1/dose", params={"device": "A"}).json()["dose_ppm_s"] == 600.0
        series = client.get(
            "/v1/series",
            params={"device": "A", "window_bins": 3, "from_ms": T0 - 240_000, "to_ms": T0 + 1},
        )
        assert series.status_code == 200
        assert series.text.splitlines()[1].startswith(f"{T0 - 240_000},0,")
        assert len(series.text.splitlines()) == 4
        too_long = client.get(
            "/v1/series", params={"device": "A", "bin_s": 60, "from_ms": 0, "to_ms": 3_600_000}
        )
        assert too_long.status_code == 400
        assert too_long.json()["error"] == "bad_parameter"


def test_health_check_filter() -> None:
    def record(message: str) -> logging.LogRecord:
        return logging.LogRecord("uvicorn.access", logging.INFO, "", 0, message, None, None)

    health_filter = HealthCheckFilter()

    assert not health_filter.filter(record('"GET /v1/healthz HTTP/1.1" 200 OK'))
    assert health_filter.filter(record('"GET /v1/healthz HTTP/1.1" 500 Internal Server Error'))
    assert health_filter.filter(record('"POST /v1/ingest HTTP/1.1" 200 OK'))
