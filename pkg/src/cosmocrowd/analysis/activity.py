"""Activity level from accelerometer moments.

Each window is reduced to population moments; classification is nearest
centroid over z-normalized (std, skewness, excess kurtosis).
"""

import json
from collections.abc import Sequence
from enum import StrEnum
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy import stats

from cosmocrowd.exceptions import (
    DegenerateFeatureError,
    MissingClassError,
    TooFewSamplesError,
    ZeroVarianceError,
)
from cosmocrowd.models.records import MIN_ACCEL_SAMPLES, AccelWindow


class ActivityClass(StrEnum):
    """Activity levels, ordered; ties resolve toward the earlier member."""

    PASSIVE = "passive"
    MODERATE = "moderate"
    ACTIVE = "active"


CLASS_ORDER: tuple[ActivityClass, ...] = tuple(ActivityClass)


class MomentVector(BaseModel):
    """Population moments of one window."""

    model_config = {"frozen": True}

    mean: float
    std: float = Field(..., ge=0)
    skewness: float
    kurtosis_excess: float

    @property
    def features(self) -> np.ndarray:
        """Classification features; the mean is deliberately left out."""
        return np.array([self.std, self.skewness, self.kurtosis_excess])


def compute_moments(window: AccelWindow | Sequence[float]) -> MomentVector:
    """Exact population moments of a window's samples.

    skewness = m3 / m2^1.5 and kurtosis_excess = m4 / m2^2 - 3 with
    mk = (1/n)·Σ(x - mean)^k.

    Raises:
        TooFewSamplesError: Fewer than 8 samples.
        ZeroVarianceError: All samples equal.
    """
    samples = window.samples if isinstance(window, AccelWindow) else window
    x = np.asarray(samples, dtype=float)
    if x.size < MIN_ACCEL_SAMPLES:
        raise TooFewSamplesError(f"Need at least {MIN_ACCEL_SAMPLES} samples, got {x.size}")
    if np.all(x == x[0]):
        raise ZeroVarianceError("All samples are equal; skewness and kurtosis are undefined")

    m2 = stats.moment(x, moment=2)
    return MomentVector(
        mean=float(np.mean(x)),
        std=float(np.sqrt(m2)),
        skewness=float(stats.skew(x, bias=True)),
        kurtosis_excess=float(stats.kurtosis(x, fisher=True, bias=True)),
    )


class Normalization(BaseModel):
    """Per-feature mean and std for z-normalization."""

    model_config = {"frozen": True}

    mean: list[float] = Field(..., min_length=3, max_length=3)
    std: list[float] = Field(..., min_length=3, max_length=3)

    @field_validator("std")
    @classmethod
    def _positive(cls, v: list[float]) -> list[float]:
        if any(s <= 0 for s in v):
            raise ValueError("normalization stds must be positive")
        return v

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (features - np.array(self.mean)) / np.array(self.std)


class ActivityModel(BaseModel):
    """Nearest-centroid classifier in normalized moment space.

    Persisted as ``{"norm": {"mean": [3], "std": [3]},
    "centroids": {"passive": [3], "moderate": [3], "active": [3]}}``.
    """

    model_config = {"frozen": True}

    norm: Normalization
    centroids: dict[ActivityClass, list[float]]

    @field_validator("centroids")
    @classmethod
    def _three_centroids(cls, v: dict[ActivityClass, list[float]]) -> dict:
        if set(v) != set(ActivityClass) or any(len(c) != 3 for c in v.values()):
            raise ValueError("exactly one 3-vector centroid per activity class is required")
        return v

    def save(self, path: Path) -> None:
        path.write_text(self.model_dump_json(indent=2))

    @classmethod
    def load(cls, path: Path) -> "ActivityModel":
        return cls.model_validate(json.loads(path.read_text()))


def train_model(labeled: Sequence[tuple[MomentVector, ActivityClass]]) -> ActivityModel:
    """Fit normalization on the pooled samples and one centroid per class.

    Raises:
        MissingClassError: A class has no samples.
        DegenerateFeatureError: A feature has zero spread over the pooled samples.
    """
    present = {ActivityClass(label) for _, label in labeled}
    missing = [c.value for c in CLASS_ORDER if c not in present]
    if missing:
        raise MissingClassError(f"No training samples for: {', '.join(missing)}")

    features = np.array([v.features for v, _ in labeled])
    labels = np.array([ActivityClass(label).value for _, label in labeled])
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    if np.any(std <= 0):
        names = ("std", "skewness", "kurtosis_excess")
        flat = [names[i] for i in np.nonzero(std <= 0)[0]]
        raise DegenerateFeatureError(f"Feature(s) without spread: {', '.join(flat)}")

    norm = Normalization(mean=mean.tolist(), std=std.tolist())
    normalized = norm.apply(features)
    centroids = {
        cls: normalized[labels == cls.value].mean(axis=0).tolist() for cls in CLASS_ORDER
    }
    return ActivityModel(norm=norm, centroids=centroids)


def classify(model: ActivityModel, v: MomentVector) -> ActivityClass:
    """Nearest centroid by Euclidean distance; ties go to the lower class."""
    point = model.norm.apply(v.features)
    best = CLASS_ORDER[0]
    best_dist = np.inf
    for cls in CLASS_ORDER:
        dist = float(np.sum((point - np.array(model.centroids[cls])) ** 2))
        if dist < best_dist:
            best, best_dist = cls, dist
    return best
