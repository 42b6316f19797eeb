"""Vegetation/soil separation and per-plot mean spectra.

Hue follows the 8-bit convention used by common imaging libraries: degrees
halved onto 0-179, with saturation and value on 0-255.
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ._seeding import derive_rng
from .errors import ConfigError, DegenerateInputError, EmptyMaskError, ShapeError
from .raster import BandRaster, SensorProfile


@dataclass(frozen=True)
class HsvRange:
    low: Tuple[int, int, int]
    high: Tuple[int, int, int]

    def __post_init__(self):
        limits = (179, 255, 255)
        for lo, hi, top in zip(self.low, self.high, limits):
            if not 0 <= lo <= hi <= top:
                raise ConfigError(f"invalid HSV range {self.low} -> {self.high}")

    def contains(self, other):
        return all(a <= b for a, b in zip(self.low, other.low)) and all(
            a >= b for a, b in zip(self.high, other.high)
        )


VEGETATION_HSV = HsvRange((25, 20, 50), (80, 255, 255))


@dataclass(frozen=True, eq=False)
class PixelMask:
    width: int
    height: int
    kept: np.ndarray

    def __post_init__(self):
        kept = np.asarray(self.kept, dtype=bool).ravel()
        object.__setattr__(self, "kept", kept)
        if kept.size != self.width * self.height:
            raise ShapeError("mask size does not match its dimensions")

    @property
    def count(self):
        return int(self.kept.sum())

    def to_raster(self):
        return BandRaster(self.width, self.height, self.kept.astype(np.float32))

    def __eq__(self, other):
        return (
            isinstance(other, PixelMask)
            and (self.width, self.height) == (other.width, other.height)
            and np.array_equal(self.kept, other.kept)
        )


@dataclass(frozen=True, eq=False)
class Spectrum:
    profile: SensorProfile
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).ravel()
        object.__setattr__(self, "values", vals)
        if vals.size != len(self.profile):
            raise ShapeError(
                f"spectrum has {vals.size} values, profile {self.profile.name!r} has {len(self.profile)} bands"
            )
        if not np.isfinite(vals).all():
            raise ShapeError("spectrum values must be finite")

    @property
    def sensor(self):
        return self.profile.name

    def scaled(self, factor):
        return Spectrum(self.profile, self.values * factor)


_SHIFT = 12
_HALF = 1 << (_SHIFT - 1)
_idx = np.arange(256, dtype=np.float64)
with np.errstate(divide="ignore"):
    # 12-bit fixed-point reciprocals, rounded half-to-even as the 8-bit converters do
    _SDIV = np.where(_idx > 0, np.rint((255 << _SHIFT) / _idx), 0).astype(np.int64)
    _HDIV = np.where(_idx > 0, np.rint((180 << _SHIFT) / (6.0 * _idx)), 0).astype(np.int64)


def rgb_to_hsv_array(r, g, b):
    """Vectorised 8-bit HSV conversion of 0-255 channel arrays.

    Channels are rounded to integers first. Saturation and hue use 12-bit
    fixed-point reciprocal tables so results agree bit-for-bit with the
    usual 8-bit image-library conversion.
    """
    r = np.clip(np.rint(np.asarray(r, dtype=np.float64)), 0, 255).astype(np.int64)
    g = np.clip(np.rint(np.asarray(g, dtype=np.float64)), 0, 255).astype(np.int64)
    b = np.clip(np.rint(np.asarray(b, dtype=np.float64)), 0, 255).astype(np.int64)
    v = np.maximum(np.maximum(r, g), b)
    diff = v - np.minimum(np.minimum(r, g), b)
    s = (diff * _SDIV[v] + _HALF) >> _SHIFT
    h = np.where(v == r, g - b, np.where(v == g, b - r + 2 * diff, r - g + 4 * diff))
    h = (h * _HDIV[diff] + _HALF) >> _SHIFT
    h = np.where(h < 0, h + 180, h)
    return h, s, v


def rgb_to_hsv(r, g, b):
    h, s, v = rgb_to_hsv_array([r], [g], [b])
    return int(h[0]), int(s[0]), int(v[0])


def _check_same_shape(rasters):
    shapes = {(r.width, r.height) for r in rasters}
    if len(shapes) != 1:
        raise ShapeError(f"rasters differ in size: {sorted(shapes)}")
    return shapes.pop()


def hsv_mask(red, green, blue, hsv_range=VEGETATION_HSV):
    """Keep pixels whose HSV lies inside ``hsv_range`` (inclusive), inputs on 0-255."""
    width, height = _check_same_shape([red, green, blue])
    h, s, v = rgb_to_hsv_array(red.values, green.values, blue.values)
    lo, hi = hsv_range.low, hsv_range.high
    kept = (
        (h >= lo[0]) & (h <= hi[0])
        & (s >= lo[1]) & (s <= hi[1])
        & (v >= lo[2]) & (v <= hi[2])
    )
    return PixelMask(width, height, kept)


def _nearest_band(profile, wavelength):
    return int(np.argmin(np.abs(profile.centers - wavelength)))


def visible_mask(bands, profile, hsv_range=VEGETATION_HSV, gain=1.0,
                 rgb_wavelengths=(650.0, 560.0, 475.0)):
    """HSV mask from the bands nearest the red, green and blue wavelengths.

    Reflectance fractions are multiplied by ``255 * gain`` before conversion.
    """
    scale = 255.0 * gain
    picked = []
    for wl in rgb_wavelengths:
        r = bands[_nearest_band(profile, wl)]
        picked.append(BandRaster(r.width, r.height, np.clip(r.values * scale, 0, 255)))
    return hsv_mask(*picked, hsv_range=hsv_range)


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    n_iter: int
    wcss_history: List[float]


def _kmeans_pp_init(x, k, rng):
    centers = [x[rng.integers(len(x))]]
    for _ in range(1, k):
        d2 = np.min((x[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1)
        centers.append(x[rng.choice(len(x), p=d2 / d2.sum())])
    return np.asarray(centers, dtype=np.float64)


def kmeans_1d(values, k, seed, max_iter=300):
    """Lloyd's algorithm on scalar values, k-means++ seeded.

    Stops when assignments repeat or after ``max_iter`` updates.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if k < 2:
        raise ConfigError("k must be >= 2")
    if np.unique(x).size < k:
        raise DegenerateInputError(f"fewer than {k} distinct values to cluster")
    rng = derive_rng(seed, "kmeans")
    centers = _kmeans_pp_init(x, k, rng)
    labels = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
    history = [float(np.sum((x - centers[labels]) ** 2))]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = x[members].mean()
        history.append(float(np.sum((x - centers[labels]) ** 2)))
        new = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        history.append(float(np.sum((x - centers[labels]) ** 2)))
    return KMeansResult(labels, centers, n_iter, history)


def kmeans_segment_thermal(thermal, expected_veg_ratio, k=2, seed=0):
    """Cluster temperatures and keep the cluster whose size best matches ``expected_veg_ratio``.

    Ties go to the cooler cluster.
    """
    if not 0 < expected_veg_ratio < 1:
        raise ConfigError("expected_veg_ratio must lie strictly between 0 and 1")
    result = kmeans_1d(thermal.values, k, seed)
    n = thermal.values.size
    best = None
    for c in range(k):
        members = result.labels == c
        if not members.any():
            continue
        gap = abs(members.sum() / n - expected_veg_ratio)
        mean = float(thermal.values[members].mean())
        key = (round(gap, 12), mean)
        if best is None or key < best[0]:
            best = (key, c)
    return PixelMask(thermal.width, thermal.height, result.labels == best[1])


def mean_reflectance(bands, mask, profile=None):
    """Per-band mean over kept pixels.

    Without ``profile`` the raw value array is returned instead of a Spectrum.
    """
    if mask.count == 0:
        raise EmptyMaskError("mask keeps no pixels")
    for b in bands:
        if (b.width, b.height) != (mask.width, mask.height):
            raise ShapeError(
                f"band {b.width}x{b.height} does not match mask {mask.width}x{mask.height}"
            )
    values = np.array([np.mean(b.values[mask.kept], dtype=np.float64) for b in bands])
    if profile is None:
        return values
    return Spectrum(profile, values)
