"""Command-line entry point.

One binary with a subcommand per pipeline stage. Exit codes: 0 success,
1 usage error, 2 data error. Data files go to ``--out`` or stdout; logs go to
stderr.
"""

import argparse
import csv
import json
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import NoReturn

from pydantic import ValidationError

from cosmocrowd.analysis.activity import (
    ActivityClass,
    ActivityModel,
    classify,
    compute_moments,
    train_model,
)
from cosmocrowd.analysis.coincidence import CoincidenceParams, candidate_to_json
from cosmocrowd.analysis.exposure import BBox
from cosmocrowd.analysis.flashdetect import (
    MIN_MASK_FRAMES,
    Frame,
    build_hot_pixel_mask,
    extract_flashes,
)
from cosmocrowd.analysis.ratestats import AltitudeModel, series_to_csv
from cosmocrowd.analysis.timesync import SyncExchange, estimate_offset
from cosmocrowd.config.settings import settings, window_bins_for
from cosmocrowd.exceptions import CodecError, CorruptLineError, CrowdError, DegenerateInputError
from cosmocrowd.models.geo import GeoPoint
from cosmocrowd.models.records import AccelWindow, DeviceProfile, FlashEvent, Record
from cosmocrowd.parsers.protocol import decode_record, encode_record
from cosmocrowd.services import query_service
from cosmocrowd.sim.simfleet import GroundTruth, evaluate, flight_profile, make_config, simulate
from cosmocrowd.storage.base import StoreSnapshot
from cosmocrowd.utils.logger import configure_logging, get_logger

logger = get_logger("cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    """Raised by the parser instead of exiting, carrying the usage text."""

    def __init__(self, message: str, usage: str):
        self.usage = usage
        super().__init__(message)


class CrowdArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors instead of exiting with code 2."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(message, self.format_usage())


# Argument types


def positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def min_devices_arg(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"must be >= 2, got {text}")
    return value


def bbox_arg(text: str) -> tuple[float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected lat_min,lat_max,lon_min,lon_max")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


# File helpers


def read_records(path: Path) -> list[Record]:
    """Decode every line of a protocol file.

    Raises:
        CorruptLineError: A line does not decode.
    """
    lines = path.read_text(encoding="ascii", errors="replace").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    records = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(decode_record(line))
        except CodecError as e:
            raise CorruptLineError(path.name, line_no, f"{e.code}: {e}") from e
    return records


def read_snapshot(path: Path) -> StoreSnapshot:
    return StoreSnapshot.from_records(read_records(path))


def write_output(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="ascii")


def _coincidence_params(args: argparse.Namespace) -> CoincidenceParams:
    return CoincidenceParams(
        window_s=args.window_s, radius_km=args.radius_km, min_devices=args.min_devices
    )


# Subcommands


def cmd_ingestd(args: argparse.Namespace) -> int:
    from cosmocrowd.main import serve

    serve(
        settings.model_copy(
            update={
                "data_dir": args.data_dir,
                "api_host": args.host,
                "api_port": args.port,
                "fsync_appends": not args.no_fsync,
            }
        )
    )
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    config = make_config(
        n_devices=args.devices,
        bbox=args.bbox,
        duration_h=args.duration_h,
        background_cpm=args.background_cpm,
        diurnal_amplitude=args.diurnal_amplitude,
        n_showers=args.showers,
        shower_footprint_km=args.footprint_km,
        shower_jitter_ms=args.jitter_ms,
        clock_offset_range_ms=args.clock_offset_range_ms,
        seed=args.seed,
        start_utc_ms=args.start_utc_ms,
        tz_offset_h=args.tz_offset_h,
    )
    if args.flight:
        model = AltitudeModel(r0=args.r0, h_d=args.h_d)
        lines = flight_profile(config, model, ascent_to_km=args.ascent_to_km)
        args.out.write_text("".join(line + "\n" for line in lines), encoding="ascii")
        return EXIT_OK

    result = simulate(config)
    args.out.write_text(result.text(), encoding="ascii")
    truth_path = args.truth or args.out.with_name(args.out.name + ".truth.json")
    truth_path.write_text(result.truth.model_dump_json(indent=2))
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    snapshot = read_snapshot(args.input)
    candidates = query_service.find_candidates(
        snapshot, _coincidence_params(args), from_ms=args.from_ms, to_ms=args.to_ms
    )
    write_output(args.out, json.dumps([candidate_to_json(c) for c in candidates], indent=2) + "\n")

    if args.truth:
        truth = GroundTruth.model_validate_json(args.truth.read_text())
        report = evaluate(candidates, truth, args.match_window_s, args.match_radius_km)
        print(
            f"precision={report.precision:.4f} recall={report.recall:.4f} "
            f"matches={len(report.matches)}",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    snapshot = read_snapshot(args.input)
    window_bins = args.window_bins or window_bins_for(args.window_h, args.bin_s)
    series = query_service.device_series(
        snapshot,
        args.device,
        bin_s=args.bin_s,
        window_bins=window_bins,
        k=args.k,
        mad_floor=args.mad_floor,
        from_ms=args.from_ms,
        to_ms=args.to_ms,
        normalize=args.normalize,
        max_bins=settings.max_series_bins,
    )
    write_output(args.out, series_to_csv(series))
    return EXIT_OK


def _read_labels(path: Path) -> dict[tuple[str, int], ActivityClass]:
    labels = {}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                key = (row["device_id"], int(row["t0_utc_ms"]))
                labels[key] = ActivityClass(row["label"])
            except (KeyError, ValueError) as e:
                raise DegenerateInputError(f"{path.name}: bad label row {row}: {e}") from e
    return labels


def cmd_classify(args: argparse.Namespace) -> int:
    snapshot = read_snapshot(args.input)
    windows = snapshot.accel_windows(args.device)

    if args.train_labels:
        labels = _read_labels(args.train_labels)
        labeled = [
            (compute_moments(w), labels[(w.device_id, w.t0_utc_ms)])
            for w in windows
            if (w.device_id, w.t0_utc_ms) in labels
        ]
        model = train_model(labeled)
        model.save(args.model)
        logger.info("Activity model trained", windows=len(labeled), path=str(args.model))
        return EXIT_OK

    model = ActivityModel.load(args.model)
    rows = ["device_id,t0_utc_ms,axis,std,skewness,kurtosis_excess,class"]
    for w in windows:
        v = compute_moments(w)
        rows.append(
            f"{w.device_id},{w.t0_utc_ms},{w.axis.value},{v.std:.6f},{v.skewness:.6f},"
            f"{v.kurtosis_excess:.6f},{classify(model, v).value}"
        )
    write_output(args.out, "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_dose(args: argparse.Namespace) -> int:
    snapshot = read_snapshot(args.input)
    report = query_service.device_dose(snapshot, args.device, args.max_gap_s)
    print(f"{report.dose_ppm_s:.2f} ppm*s")
    return EXIT_OK


def cmd_mapexport(args: argparse.Namespace) -> int:
    snapshot = read_snapshot(args.input)
    bbox = BBox(*args.bbox)
    if args.kind == "pollution":
        grid = query_service.pollution_map(
            snapshot, bbox, args.cell_km or settings.pollution_cell_km
        )
    elif args.kind == "showers":
        grid = query_service.shower_map(
            snapshot, _coincidence_params(args), bbox, args.cell_km or settings.showers_cell_km
        )
    else:
        grid = query_service.height_map(snapshot, bbox, args.cell_km or settings.showers_cell_km)
    if grid.dropped:
        logger.info("Samples outside the map area", dropped=grid.dropped)
    write_output(args.out, json.dumps(grid.to_geojson()) + "\n")
    return EXIT_OK


def cmd_flashscan(args: argparse.Namespace) -> int:
    # Reason: --t0-ms is device-clock time; the offset turns it into UTC so the
    # written line carries the device-local stamp plus the offset.
    t0_utc_ms = args.t0_ms + args.offset_ms
    frames = [
        Frame.from_pgm(path, t_utc_ms=t0_utc_ms + i * args.frame_interval_ms)
        for i, path in enumerate(args.frames)
    ]
    mask = None
    if not args.no_mask and len(frames) >= MIN_MASK_FRAMES:
        mask = build_hot_pixel_mask(frames, threshold=args.threshold, occupancy=args.occupancy)
        logger.info("Hot-pixel mask built", masked=len(mask.excluded))

    geo = GeoPoint(lat_deg=args.lat, lon_deg=args.lon, alt_m=args.alt_m)
    lines = []
    for frame in frames:
        for flash in extract_flashes(frame, mask, threshold=args.threshold):
            event = FlashEvent(
                device_id=args.device,
                t_utc_ms=frame.t_utc_ms,
                geo=geo,
                magnitude=flash.cluster_size,
            )
            lines.append(encode_record(event, offset_ms=args.offset_ms) + "\n")
    write_output(args.out, "".join(lines))
    return EXIT_OK


def _read_exchanges(path: Path) -> list[SyncExchange]:
    exchanges = []
    with path.open(newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#") or row[0].strip() == "t1":
                continue
            try:
                t1, t2, t3, t4 = (int(v) for v in row)
                exchanges.append(SyncExchange(t1=t1, t2=t2, t3=t3, t4=t4))
            except ValueError as e:
                raise DegenerateInputError(f"{path.name}: bad exchange row {row}") from e
    return exchanges


def cmd_sync(args: argparse.Namespace) -> int:
    estimate = estimate_offset(_read_exchanges(args.exchanges))
    print(f"offset_ms={estimate.offset_ms} rtt_ms={estimate.rtt_ms}")
    if args.rewrite is None:
        return EXIT_OK

    lines = []
    for record in read_records(args.rewrite):
        if not isinstance(record, DeviceProfile):
            # Reason: The raw log's own offset field is already folded into the
            # decoded time; the estimate shifts it the rest of the way to UTC.
            field = "t0_utc_ms" if isinstance(record, AccelWindow) else "t_utc_ms"
            shifted = getattr(record, field) + estimate.offset_ms
            record = record.model_copy(update={field: shifted})
        lines.append(encode_record(record) + "\n")
    write_output(args.out, "".join(lines))
    return EXIT_OK


# Parser


def _add_coincidence_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window-s", type=positive_float, default=settings.coincidence_window_s)
    p.add_argument("--radius-km", type=positive_float, default=settings.coincidence_radius_km)
    p.add_argument("--min-devices", type=min_devices_arg, default=settings.coincidence_min_devices)


def build_parser() -> CrowdArgumentParser:
    parser = CrowdArgumentParser(
        prog="cosmocrowd",
        description="cosmocrowd - crowd-sensed cosmic-ray shower detection",
    )
    parser.add_argument("--log-level", default=settings.log_level)
    parser.add_argument("--log-json", action="store_true", default=settings.log_json)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingestd", help="Run the HTTP ingest daemon")
    p.add_argument("--data-dir", type=Path, default=settings.data_dir)
    p.add_argument("--host", default=settings.api_host)
    p.add_argument("--port", type=int, default=settings.api_port)
    p.add_argument("--no-fsync", action="store_true", help="Skip fsync after appends")
    p.set_defaults(func=cmd_ingestd)

    p = sub.add_parser("simulate", help="Simulate a device fleet")
    p.add_argument("--out", type=Path, required=True, help="Protocol lines output")
    p.add_argument("--truth", type=Path, help="Ground truth JSON (default <out>.truth.json)")
    p.add_argument("--devices", type=int, default=50)
    p.add_argument("--bbox", type=bbox_arg, default=settings.map_bbox)
    p.add_argument("--duration-h", type=positive_float, default=24.0)
    p.add_argument("--background-cpm", type=positive_float, default=5.0)
    p.add_argument("--diurnal-amplitude", type=float, default=0.3)
    p.add_argument("--showers", type=int, default=20)
    p.add_argument("--footprint-km", type=positive_float, default=1.0)
    p.add_argument("--jitter-ms", type=int, default=200)
    p.add_argument("--clock-offset-range-ms", type=int, default=5000)
    p.add_argument("--start-utc-ms", type=int, default=1_394_409_600_000)
    p.add_argument("--tz-offset-h", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--flight", action="store_true", help="Two devices through a flight profile")
    p.add_argument("--ascent-to-km", type=positive_float, default=9.0)
    p.add_argument("--r0", type=positive_float, default=1.0, help="Ground rate (flight)")
    p.add_argument("--h-d", type=positive_float, default=1.5, help="Doubling height km (flight)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="Find shower candidates")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path)
    _add_coincidence_flags(p)
    p.add_argument("--from-ms", type=int)
    p.add_argument("--to-ms", type=int)
    p.add_argument("--truth", type=Path, help="Evaluate against simulator ground truth")
    p.add_argument("--match-window-s", type=positive_float, default=2.0)
    p.add_argument("--match-radius-km", type=positive_float, default=2.0)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("baseline", help="Rate series with baseline and spike flags (CSV)")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--device", required=True)
    p.add_argument("--out", type=Path)
    p.add_argument("--bin-s", type=positive_int, default=settings.bin_s)
    p.add_argument("--window-h", type=positive_float, default=settings.baseline_window_h)
    p.add_argument("--window-bins", type=int, help="Overrides --window-h (odd, >= 3)")
    p.add_argument("--k", type=positive_float, default=settings.spike_k)
    p.add_argument("--mad-floor", type=positive_float, default=settings.spike_mad_floor)
    p.add_argument("--from-ms", type=int)
    p.add_argument("--to-ms", type=int)
    p.add_argument("--normalize", action="store_true", help="Divide cpm by device sensitivity")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("classify", help="Classify accelerometer windows or train a model")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True, help="Model JSON to read (or write)")
    p.add_argument("--device")
    p.add_argument("--out", type=Path)
    p.add_argument(
        "--train-labels", type=Path, help="CSV device_id,t0_utc_ms,label; trains --model"
    )
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("dose", help="Accumulated CO dose along a track")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--device", required=True)
    p.add_argument("--max-gap-s", type=positive_float, default=settings.dose_max_gap_s)
    p.set_defaults(func=cmd_dose)

    p = sub.add_parser("mapexport", help="GeoJSON grid map")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--kind", choices=["pollution", "showers", "heights"], default="pollution")
    p.add_argument("--out", type=Path)
    p.add_argument("--cell-km", type=positive_float)
    p.add_argument("--bbox", type=bbox_arg, default=settings.map_bbox)
    _add_coincidence_flags(p)
    p.set_defaults(func=cmd_mapexport)

    p = sub.add_parser("flashscan", help="Extract flash events from PGM frames")
    p.add_argument("--frames", type=Path, nargs="+", required=True)
    p.add_argument("--device", required=True)
    p.add_argument("--lat", type=float, required=True)
    p.add_argument("--lon", type=float, required=True)
    p.add_argument("--alt-m", type=float, default=0.0)
    p.add_argument("--t0-ms", type=int, required=True, help="Device-clock time of frame 0")
    p.add_argument("--frame-interval-ms", type=positive_int, default=1000)
    p.add_argument("--offset-ms", type=int, default=0, help="Clock offset written to EV lines")
    p.add_argument("--threshold", type=int, default=settings.flash_threshold)
    p.add_argument("--occupancy", type=float, default=settings.hot_pixel_occupancy)
    p.add_argument("--no-mask", action="store_true", help="Skip hot-pixel masking")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_flashscan)

    p = sub.add_parser("sync", help="Estimate a clock offset from sync exchanges")
    p.add_argument("--exchanges", type=Path, required=True, help="CSV rows t1,t2,t3,t4")
    p.add_argument("--rewrite", type=Path, help="Raw protocol log to shift by the offset")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_sync)

    return parser


def run(argv: Sequence[str]) -> int:
    """Parse arguments and dispatch a subcommand.

    Returns:
        0 on success, 1 on usage error, 2 on data error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        print(e.usage, end="", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    configure_logging(log_level=args.log_level, json_format=args.log_json)
    try:
        return args.func(args)
    except CrowdError as e:
        print(f"error: {e.code}: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValidationError as e:
        problem = e.errors()[0]
        print(f"error: invalid_value: {problem['loc']}: {problem['msg']}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: io_error: {e}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    """Main entry point."""
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
