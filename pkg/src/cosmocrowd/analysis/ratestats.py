"""Count-rate series: binning, slow baseline, spike flags, altitude law.

The slow background (daily temperature drift) is tracked with a rolling
median; sharp peaks are bins whose residual exceeds k robust sigmas.
"""

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from pandas.api.typing import Rolling
from pydantic import BaseModel, Field

from cosmocrowd.exceptions import (
    BadFitError,
    BadRangeError,
    BadWindowError,
    BaselineMissingError,
    DegenerateInputError,
)
from cosmocrowd.models.records import FlashEvent

MAD_TO_SIGMA = 1.4826


@dataclass(frozen=True)
class RateSeries:
    """Binned counts for one device with derived per-minute rates.

    ``window_bins`` is 0 until fit_baseline has run.
    """

    device_id: str
    bin_s: int
    t_start_ms: int
    counts: np.ndarray
    cpm: np.ndarray
    baseline: np.ndarray
    spike_flags: np.ndarray
    window_bins: int = 0

    def __post_init__(self) -> None:
        n = len(self.counts)
        if not (len(self.cpm) == len(self.baseline) == len(self.spike_flags) == n):
            raise ValueError("RateSeries arrays must share one length")
        for name in ("counts", "cpm", "baseline", "spike_flags"):
            getattr(self, name).setflags(write=False)

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def bin_starts_ms(self) -> np.ndarray:
        return self.t_start_ms + np.arange(len(self), dtype=np.int64) * self.bin_s * 1000

    @property
    def residual(self) -> np.ndarray:
        return self.cpm - self.baseline


class AltitudeModel(BaseModel):
    """Exponential rate law r(h) = r0 · 2^(h / h_d)."""

    model_config = {"frozen": True}

    r0: float = Field(..., gt=0, description="Ground-level rate (cpm at h=0)")
    h_d: float = Field(..., gt=0, description="Doubling height in km")

    def rate(self, alt_km: float) -> float:
        return self.r0 * 2.0 ** (alt_km / self.h_d)


def bin_events(
    events: Iterable[FlashEvent],
    bin_s: int,
    t_start_ms: int,
    t_end_ms: int,
    device_id: str = "",
    sensitivity: float = 1.0,
) -> RateSeries:
    """Count events per bin over [t_start_ms, t_end_ms).

    Bins are left-closed, right-open; events outside the range are dropped.
    With ``sensitivity`` != 1.0 the cpm column is divided by it so devices of
    different sensitivity are comparable.

    Raises:
        BadRangeError: bin_s < 1 or empty range.
    """
    if bin_s < 1:
        raise BadRangeError(f"bin_s must be >= 1, got {bin_s}")
    if t_end_ms <= t_start_ms:
        raise BadRangeError(f"Empty range [{t_start_ms}, {t_end_ms})")
    if sensitivity <= 0:
        raise BadRangeError(f"sensitivity must be positive, got {sensitivity}")

    bin_ms = bin_s * 1000
    n_bins = math.ceil((t_end_ms - t_start_ms) / bin_ms)
    times = np.fromiter((e.t_utc_ms for e in events), dtype=np.int64)
    times = times[(times >= t_start_ms) & (times < t_end_ms)]
    counts = np.bincount((times - t_start_ms) // bin_ms, minlength=n_bins).astype(np.int64)

    cpm = counts * (60.0 / bin_s) / sensitivity
    return RateSeries(
        device_id=device_id,
        bin_s=bin_s,
        t_start_ms=t_start_ms,
        counts=counts,
        cpm=cpm,
        baseline=np.zeros(n_bins),
        spike_flags=np.zeros(n_bins, dtype=bool),
    )


def _rolling(values: np.ndarray, window_bins: int) -> Rolling:
    """Centered rolling window, truncated at the series edges."""
    return pd.Series(values, dtype=float).rolling(window_bins, center=True, min_periods=1)


def _median_abs_deviation(window: np.ndarray) -> float:
    return float(np.median(np.abs(window - np.median(window))))


def rolling_median(values: np.ndarray, window_bins: int) -> np.ndarray:
    """Centered rolling median, window truncated at the series edges."""
    if len(values) == 0:
        return np.zeros(0)
    return _rolling(values, window_bins).median().to_numpy()


def fit_baseline(series: RateSeries, window_bins: int) -> RateSeries:
    """Fill the baseline with the centered rolling median of cpm.

    Raises:
        BadWindowError: window_bins is even or below 3.
    """
    if window_bins < 3 or window_bins % 2 == 0:
        raise BadWindowError(f"window_bins must be odd and >= 3, got {window_bins}")
    return replace(
        series,
        baseline=rolling_median(series.cpm, window_bins),
        spike_flags=np.zeros(len(series), dtype=bool),
        window_bins=window_bins,
    )


def flag_spikes(series: RateSeries, k: float = 5.0, mad_floor: float = 0.5) -> RateSeries:
    """Flag bins whose residual over the baseline exceeds k robust sigmas.

    σ̂ per bin is 1.4826·MAD of the residuals in the baseline window, floored
    at ``mad_floor`` cpm.

    Raises:
        BaselineMissingError: fit_baseline has not been applied.
    """
    if series.window_bins == 0:
        raise BaselineMissingError("fit_baseline must run before flag_spikes")
    if len(series) == 0:
        return series

    residual = series.residual
    mad = (
        _rolling(residual, series.window_bins)
        .apply(_median_abs_deviation, raw=True)
        .to_numpy()
    )
    sigma = np.maximum(MAD_TO_SIGMA * mad, mad_floor)
    return replace(series, spike_flags=residual > k * sigma)


def fit_altitude(points: Sequence[tuple[float, float]]) -> AltitudeModel:
    """Least-squares fit of log2(cpm) = log2(r0) + h / h_d.

    Args:
        points: (alt_km, cpm) pairs.

    Raises:
        DegenerateInputError: Fewer than 2 distinct altitudes or any cpm <= 0.
        BadFitError: The fitted rate does not increase with altitude.
    """
    if len(points) == 0:
        raise DegenerateInputError("No altitude points")
    alt = np.array([p[0] for p in points], dtype=float)
    cpm = np.array([p[1] for p in points], dtype=float)
    if np.any(cpm <= 0):
        raise DegenerateInputError("All rates must be positive")
    if len(np.unique(alt)) < 2:
        raise DegenerateInputError("Need at least 2 distinct altitudes")

    slope, intercept = np.polyfit(alt, np.log2(cpm), 1)
    if not slope > 0:
        raise BadFitError(f"Rate does not grow with altitude (slope {slope:.4g} per km)")
    return AltitudeModel(r0=float(2.0**intercept), h_d=float(1.0 / slope))


CSV_HEADER = "bin_start_ms,counts,cpm,baseline,spike"


def series_to_csv(series: RateSeries) -> str:
    """CSV text with one row per bin; cpm and baseline use 4 fractional digits."""
    rows = [CSV_HEADER]
    for start, count, cpm, base, spike in zip(
        series.bin_starts_ms, series.counts, series.cpm, series.baseline, series.spike_flags
    ):
        rows.append(f"{int(start)},{int(count)},{float(cpm):.4f},{float(base):.4f},{int(spike)}")
    return "\n".join(rows) + "\n"
