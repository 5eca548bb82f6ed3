"""Flash extraction from light-shielded camera frames.

A particle crossing the sensor lights a small cluster of pixels. Frames are
thresholded on luma, persistently bright (hot) pixels are masked out, and the
remaining bright pixels are grouped by 8-connectivity.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import imageio.v3 as iio
import numpy as np
from scipy import ndimage

from cosmocrowd.exceptions import DimensionMismatchError, TooFewFramesError

MIN_MASK_FRAMES = 10
_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Frame:
    """Single-channel luma frame, row-major, values 0..255."""

    width: int
    height: int
    luma: np.ndarray
    t_utc_ms: int = 0

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise DimensionMismatchError("Frame dimensions must be positive")
        luma = np.asarray(self.luma)
        if luma.size != self.width * self.height:
            raise DimensionMismatchError(
                f"Frame has {luma.size} values, expected {self.width}x{self.height}"
            )
        if luma.size and (luma.min() < 0 or luma.max() > 255):
            raise ValueError("luma values must be within 0..255")
        luma = luma.reshape(self.height, self.width).astype(np.uint8)
        luma.setflags(write=False)
        object.__setattr__(self, "luma", luma)

    @classmethod
    def from_pgm(cls, path: Path, t_utc_ms: int = 0) -> "Frame":
        """Read a binary PGM (P5, maxval 255) file."""
        pixels = np.asarray(iio.imread(path))
        if pixels.ndim != 2:
            raise DimensionMismatchError(f"{path} is not a single-channel image")
        height, width = pixels.shape
        return cls(width=width, height=height, luma=pixels, t_utc_ms=t_utc_ms)


@dataclass(frozen=True)
class HotPixelMask:
    """Set of (x, y) pixel coordinates excluded from flash detection."""

    width: int
    height: int
    excluded: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        for x, y in self.excluded:
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise DimensionMismatchError(f"Masked pixel ({x}, {y}) is outside the frame")

    @classmethod
    def empty(cls, width: int, height: int) -> "HotPixelMask":
        return cls(width=width, height=height)

    def as_array(self) -> np.ndarray:
        """Boolean (height, width) array, True where excluded."""
        arr = np.zeros((self.height, self.width), dtype=bool)
        for x, y in self.excluded:
            arr[y, x] = True
        return arr


@dataclass(frozen=True)
class Flash:
    """One connected bright-pixel cluster."""

    cluster_size: int
    centroid_xy: tuple[float, float]


def build_hot_pixel_mask(
    frames: Sequence[Frame],
    threshold: int = 40,
    occupancy: float = 0.5,
) -> HotPixelMask:
    """Mask pixels that are bright in more than `occupancy` of the frames.

    Raises:
        TooFewFramesError: Fewer than 10 frames.
        DimensionMismatchError: Frames differ in size.
    """
    if len(frames) < MIN_MASK_FRAMES:
        raise TooFewFramesError(
            f"Need at least {MIN_MASK_FRAMES} frames for a hot-pixel mask, got {len(frames)}"
        )
    width, height = frames[0].width, frames[0].height
    if any(f.width != width or f.height != height for f in frames):
        raise DimensionMismatchError("All frames must share the same dimensions")

    stack = np.stack([f.luma for f in frames])
    bright_fraction = (stack >= threshold).mean(axis=0)
    ys, xs = np.nonzero(bright_fraction > occupancy)
    return HotPixelMask(
        width=width,
        height=height,
        excluded=frozenset(zip(xs.tolist(), ys.tolist(), strict=True)),
    )


def extract_flashes(
    frame: Frame,
    mask: HotPixelMask | None = None,
    threshold: int = 40,
) -> list[Flash]:
    """Group unmasked pixels with luma >= threshold into 8-connected clusters.

    Returns:
        One Flash per connected component, ordered by the component's smallest
        row-major pixel index.

    Raises:
        DimensionMismatchError: Mask and frame sizes differ.
    """
    if mask is None:
        mask = HotPixelMask.empty(frame.width, frame.height)
    if (mask.width, mask.height) != (frame.width, frame.height):
        raise DimensionMismatchError(
            f"Mask is {mask.width}x{mask.height}, frame is {frame.width}x{frame.height}"
        )

    bright = (frame.luma >= threshold) & ~mask.as_array()
    labels, n = ndimage.label(bright, structure=_EIGHT_CONNECTED)
    if n == 0:
        return []

    flat = labels.ravel()
    ys, xs = np.indices(labels.shape)
    sizes = np.bincount(flat, minlength=n + 1)
    sum_x = np.bincount(flat, weights=xs.ravel(), minlength=n + 1)
    sum_y = np.bincount(flat, weights=ys.ravel(), minlength=n + 1)
    first_index = np.full(n + 1, flat.size, dtype=np.int64)
    np.minimum.at(first_index, flat, np.arange(flat.size))

    order = sorted(range(1, n + 1), key=lambda k: first_index[k])
    return [
        Flash(
            cluster_size=int(sizes[k]),
            centroid_xy=(float(sum_x[k] / sizes[k]), float(sum_y[k] / sizes[k])),
        )
        for k in order
    ]
