"""Configuration management using pydantic-settings.

Supports environment variables and .env file loading.
"""

from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application configuration.

    Reason: One typed source for the ingest daemon, the query endpoints and the
    CLI defaults, overridable per deployment through the environment.
    """

    model_config = SettingsConfigDict(
        env_file=(".env", ".env.local"),  # .env.local overrides .env
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = "cosmocrowd"
    log_level: str = "INFO"
    log_json: bool = False  # Set True in production for structured logs

    # API
    api_host: str = "0.0.0.0"
    api_port: int = 8000

    # Storage
    data_dir: Path = Field(
        default=Path("data/logs"),
        description="Directory holding the daily events-YYYYMMDD.log files",
    )
    fsync_appends: bool = Field(
        default=True,
        description="fsync each payload append before acknowledging it",
    )
    min_time_ms: int = Field(default=0, description="Earliest accepted UTC timestamp")
    max_time_ms: int = Field(
        default=4_102_444_800_000,
        description="Latest accepted UTC timestamp (2100-01-01)",
    )

    # Flash detection
    flash_threshold: int = Field(default=40, ge=0, le=255)
    hot_pixel_occupancy: float = Field(default=0.5, ge=0.0, le=1.0)

    # Rate statistics
    bin_s: int = Field(default=60, ge=1)
    baseline_window_h: float = Field(default=6.0, gt=0)
    spike_k: float = Field(default=5.0, gt=0)
    spike_mad_floor: float = Field(default=0.5, gt=0)
    max_series_bins: int = Field(
        default=200_000,
        ge=1,
        description="Largest bin count a single series query may request",
    )

    # Coincidence detection
    coincidence_window_s: float = Field(default=1.0, gt=0)
    coincidence_radius_km: float = Field(default=2.0, gt=0)
    coincidence_min_devices: int = Field(default=2, ge=2)

    # Exposure and maps
    dose_max_gap_s: float = Field(default=300.0, gt=0)
    map_bbox: tuple[float, float, float, float] = Field(
        default=(50.35, 50.55, 30.35, 30.70),
        description="Default map area lat_min, lat_max, lon_min, lon_max (JSON in env)",
    )
    showers_cell_km: float = Field(default=1.0, gt=0)
    pollution_cell_km: float = Field(default=0.5, gt=0)

    # Activity
    activity_model_path: Path | None = Field(
        default=None,
        description="JSON activity model used by /v1/moments to attach classes",
    )

    @field_validator("map_bbox", mode="before")
    @classmethod
    def parse_map_bbox(cls, v):
        """Also accept a comma-separated string (e.g. from a CLI flag)."""
        if isinstance(v, str):
            return tuple(float(part) for part in v.split(","))
        return v

    def baseline_window_bins(self, bin_s: int | None = None) -> int:
        """Default baseline window in bins for the given bin width (odd, >= 3)."""
        return window_bins_for(self.baseline_window_h, bin_s or self.bin_s)


def window_bins_for(window_h: float, bin_s: int) -> int:
    """Convert a window length in hours to an odd bin count of at least 3."""
    bins = max(3, round(window_h * 3600 / bin_s))
    return bins if bins % 2 == 1 else bins + 1


# Global singleton instance
# Reason: Settings are loaded once and shared across the application
settings = Settings()
