"""Tests for binning, baseline fitting, spike flags and the altitude law."""

import math
from dataclasses import replace

import numpy as np
import pytest

from cosmocrowd.analysis.ratestats import (
    AltitudeModel,
    RateSeries,
    bin_events,
    fit_altitude,
    fit_baseline,
    flag_spikes,
    series_to_csv,
)
from cosmocrowd.config.settings import window_bins_for
from cosmocrowd.exceptions import (
    BadFitError,
    BadRangeError,
    BadWindowError,
    BaselineMissingError,
    DegenerateInputError,
)
from tests.helpers import make_event


def make_series(cpm: list[float] | np.ndarray, bin_s: int = 60) -> RateSeries:
    cpm = np.asarray(cpm, dtype=float)
    n = len(cpm)
    return RateSeries(
        device_id="dev1",
        bin_s=bin_s,
        t_start_ms=0,
        counts=np.round(cpm * bin_s / 60).astype(np.int64),
        cpm=cpm,
        baseline=np.zeros(n),
        spike_flags=np.zeros(n, dtype=bool),
    )


def test_bin_events_counts_and_cpm() -> None:
    events = [make_event(t_utc_ms=t) for t in (0, 10_000, 30_000)]

    series = bin_events(events, bin_s=60, t_start_ms=0, t_end_ms=60_000)

    assert series.counts.tolist() == [3]
    assert series.cpm.tolist() == [3.0]


def test_bin_events_without_events() -> None:
    series = bin_events([], bin_s=60, t_start_ms=0, t_end_ms=180_000)

    assert series.counts.tolist() == [0, 0, 0]


def test_bin_boundary_is_left_closed() -> None:
    series = bin_events([make_event(t_utc_ms=60_000)], bin_s=60, t_start_ms=0, t_end_ms=120_000)

    assert series.counts.tolist() == [0, 1]
    assert series.bin_starts_ms.tolist() == [0, 60_000]


def test_bin_events_drops_out_of_range_and_scales_by_sensitivity() -> None:
    events = [make_event(t_utc_ms=t) for t in (-1, 0, 1_000, 60_000)]

    series = bin_events(events, bin_s=30, t_start_ms=0, t_end_ms=60_000, sensitivity=2.0)

    assert series.counts.tolist() == [2, 0]
    assert series.cpm.tolist() == [2.0, 0.0]


@pytest.mark.parametrize("bin_s,start,end", [(0, 0, 60_000), (60, 1000, 1000), (60, 10, 0)])
def test_bin_events_rejects_bad_ranges(bin_s: int, start: int, end: int) -> None:
    with pytest.raises(BadRangeError):
        bin_events([], bin_s=bin_s, t_start_ms=start, t_end_ms=end)


def test_constant_baseline() -> None:
    series = fit_baseline(make_series([5.0] * 20), window_bins=7)

    assert series.baseline.tolist() == [5.0] * 20
    assert series.window_bins == 7


def test_baseline_ignores_single_spike() -> None:
    series = fit_baseline(make_series([5, 5, 50, 5, 5]), window_bins=5)

    assert series.baseline[2] == 5.0


def test_baseline_follows_linear_trend_inside() -> None:
    cpm = np.arange(10, dtype=float)

    series = fit_baseline(make_series(cpm), window_bins=3)

    assert series.baseline[1:-1].tolist() == cpm[1:-1].tolist()


@pytest.mark.parametrize("window", [1, 2, 4, 0])
def test_baseline_window_must_be_odd_and_at_least_three(window: int) -> None:
    with pytest.raises(BadWindowError):
        fit_baseline(make_series([1.0] * 5), window_bins=window)


def test_flag_spikes_requires_baseline() -> None:
    with pytest.raises(BaselineMissingError):
        flag_spikes(make_series([1.0] * 5))


def test_constant_series_has_no_spikes() -> None:
    series = flag_spikes(fit_baseline(make_series([5.0] * 30), window_bins=11))

    assert not series.spike_flags.any()


def test_single_spike_is_flagged() -> None:
    cpm = [5.0] * 21
    cpm[10] = 50.0

    series = flag_spikes(fit_baseline(make_series(cpm), window_bins=7), k=5.0, mad_floor=0.5)

    assert np.nonzero(series.spike_flags)[0].tolist() == [10]


def test_smooth_daily_wave_raises_no_flags() -> None:
    t_h = np.arange(3 * 24 * 60) / 60.0
    cpm = 5.0 + np.sin(2 * math.pi * t_h / 24)

    series = flag_spikes(fit_baseline(make_series(cpm), window_bins=window_bins_for(6, 60)))

    assert not series.spike_flags.any()


def test_background_separation_on_five_day_series() -> None:
    rng = np.random.default_rng(2014)
    n = 5 * 24 * 60
    t_h = np.arange(n) / 60.0
    true_baseline = 5.0 + 1.5 * np.sin(2 * math.pi * t_h / 24)
    cpm = true_baseline + rng.normal(0.0, 0.3, n)
    spikes = rng.choice(n, size=25, replace=False)
    cpm[spikes] += 10.0

    window = window_bins_for(6, 60)
    series = flag_spikes(fit_baseline(make_series(cpm), window_bins=window))

    rmse = float(np.sqrt(np.mean((series.baseline - true_baseline) ** 2)))
    flagged = set(np.nonzero(series.spike_flags)[0].tolist())
    assert window == 361
    assert rmse <= 0.25
    assert len(flagged & set(spikes.tolist())) >= 24
    assert len(flagged - set(spikes.tolist())) <= 0.01 * n


def test_fit_altitude_on_exact_exponential() -> None:
    model = fit_altitude([(0.0, 1.0), (1.5, 2.0), (3.0, 4.0)])

    assert model.r0 == pytest.approx(1.0, abs=1e-9)
    assert model.h_d == pytest.approx(1.5, abs=1e-9)


def test_altitude_model_rate_at_cruise() -> None:
    assert AltitudeModel(r0=1.0, h_d=1.5).rate(9.0) == pytest.approx(64.0)


def test_fit_altitude_rejects_degenerate_input() -> None:
    with pytest.raises(DegenerateInputError):
        fit_altitude([(2.0, 1.0), (2.0, 3.0)])
    with pytest.raises(DegenerateInputError):
        fit_altitude([(0.0, 1.0), (1.0, 0.0)])
    with pytest.raises(DegenerateInputError):
        fit_altitude([])


def test_fit_altitude_rejects_decreasing_rate() -> None:
    with pytest.raises(BadFitError):
        fit_altitude([(0.0, 4.0), (1.0, 2.0)])


def test_series_to_csv() -> None:
    series = fit_baseline(make_series([1.0, 2.0, 3.0]), window_bins=3)

    text = series_to_csv(series)

    assert text == (
        "bin_start_ms,counts,cpm,baseline,spike\n"
        "0,1,1.0000,1.5000,0\n"
        "60000,2,2.0000,2.0000,0\n"
        "120000,3,3.0000,2.5000,0\n"
    )


@pytest.mark.parametrize("noise,tolerance", [(0.01, 0.05), (0.05, 0.15)])
def test_fit_altitude_recovers_parameters_under_noise(noise: float, tolerance: float) -> None:
    rng = np.random.default_rng(1394)
    alt_km = np.linspace(0.0, 10.0, 21)

    for _ in range(100):
        r0, h_d = rng.uniform(0.5, 5.0), rng.uniform(1.0, 3.0)
        cpm = r0 * 2.0 ** (alt_km / h_d) * (1.0 + rng.normal(0.0, noise, len(alt_km)))

        model = fit_altitude(list(zip(alt_km, cpm)))

        assert model.r0 == pytest.approx(r0, rel=tolerance)
        assert model.h_d == pytest.approx(h_d, rel=tolerance)


def test_residual_is_cpm_minus_baseline() -> None:
    rng = np.random.default_rng(5)

    for window in (3, 7, 31):
        cpm = rng.poisson(5.0, 200) * 1.0
        series = flag_spikes(fit_baseline(make_series(cpm), window_bins=window))

        assert np.array_equal(series.cpm - series.baseline - series.residual, np.zeros(200))


def test_baseline_of_constant_series_is_idempotent() -> None:
    once = fit_baseline(make_series([4.0] * 50), window_bins=9)
    twice = fit_baseline(make_series(once.baseline), window_bins=9)

    assert np.array_equal(once.baseline, twice.baseline)


def test_baseline_of_monotone_series_is_stable_inside() -> None:
    rng = np.random.default_rng(11)

    for window in (3, 5, 11):
        half = window // 2
        cpm = np.cumsum(rng.uniform(0.1, 2.0, 60))

        once = fit_baseline(make_series(cpm), window_bins=window)
        twice = fit_baseline(make_series(once.baseline), window_bins=window)

        assert np.array_equal(once.baseline[half:-half], cpm[half:-half])
        assert np.array_equal(twice.baseline[half:-half], once.baseline[half:-half])


def test_no_flags_when_rate_equals_baseline() -> None:
    rng = np.random.default_rng(3)
    cpm = rng.uniform(0.0, 20.0, 100)
    series = replace(make_series(cpm), baseline=cpm.copy(), window_bins=7)

    flagged = flag_spikes(series, k=5.0, mad_floor=0.5)

    assert not flagged.spike_flags.any()


def test_baseline_on_a_day_of_one_second_bins() -> None:
    # A day of one-second bins with a six-hour window
    series = make_series(np.full(86_400, 5.0), bin_s=1)

    fitted = fit_baseline(series, window_bins=21_601)

    assert fitted.baseline.shape == (86_400,)
    assert np.all(fitted.baseline == 5.0)
