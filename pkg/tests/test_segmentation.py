import colorsys

import cv2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wiltscan.errors import ConfigError, DegenerateInputError, EmptyMaskError, ShapeError
from wiltscan.raster import BandRaster, multispectral_profile
from wiltscan.segmentation import (
    VEGETATION_HSV,
    HsvRange,
    PixelMask,
    hsv_mask,
    kmeans_1d,
    kmeans_segment_thermal,
    mean_reflectance,
    rgb_to_hsv,
    rgb_to_hsv_array,
    visible_mask,
)


def hsv_to_rgb(h, s, v):
    """Test helper: inverse conversion on the halved-hue 8-bit scale."""
    r, g, b = colorsys.hsv_to_rgb(h * 2 / 360.0, s / 255.0, v / 255.0)
    return round(r * 255), round(g * 255), round(b * 255)


def uniform(w, h, value):
    return BandRaster(w, h, np.full(w * h, value, dtype=np.float32))


@pytest.mark.parametrize("rgb,hsv", [
    ((0, 0, 0), (0, 0, 0)),
    ((0, 255, 0), (60, 255, 255)),
    ((128, 128, 128), (0, 0, 128)),
    ((255, 0, 0), (0, 255, 255)),
    ((0, 0, 255), (120, 255, 255)),
])
def test_hsv_examples(rgb, hsv):
    assert rgb_to_hsv(*rgb) == hsv


def test_hsv_matches_image_library_on_random_colors(rng):
    c = rng.integers(0, 256, size=(50_000, 3)).astype(np.uint8)
    ref = cv2.cvtColor(c[None], cv2.COLOR_RGB2HSV)[0].astype(np.int64)
    h, s, v = rgb_to_hsv_array(c[:, 0], c[:, 1], c[:, 2])
    np.testing.assert_array_equal(np.stack([h, s, v], 1), ref)


def test_hsv_close_to_textbook_formula(rng):
    c = rng.integers(0, 256, size=(5000, 3))
    h, s, v = rgb_to_hsv_array(c[:, 0], c[:, 1], c[:, 2])
    for (r, g, b), hh, ss, vv in zip(c[:200], h, s, v):
        th, ts, tv = colorsys.rgb_to_hsv(r / 255, g / 255, b / 255)
        dh = abs(hh - th * 180) % 180
        assert min(dh, 180 - dh) <= 1
        assert abs(ss - ts * 255) <= 1
        assert vv == round(tv * 255)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 179), st.integers(128, 255), st.integers(128, 255))
def test_hue_roundtrip_for_saturated_pixels(h, s, v):
    hh, _, _ = rgb_to_hsv(*hsv_to_rgb(h, s, v))
    d = abs(hh - h) % 180
    assert min(d, 180 - d) <= 1


def test_hsv_range_validation():
    with pytest.raises(ConfigError):
        HsvRange((30, 0, 0), (20, 255, 255))
    with pytest.raises(ConfigError):
        HsvRange((0, 0, 0), (180, 255, 255))


def test_mask_green_kept_gray_dropped():
    green = hsv_mask(uniform(3, 2, 0), uniform(3, 2, 255), uniform(3, 2, 0))
    assert green.count == 6
    gray = hsv_mask(uniform(3, 2, 128), uniform(3, 2, 128), uniform(3, 2, 128))
    assert gray.count == 0


def test_mask_inclusive_boundary():
    rgb = (40, 200, 90)
    hsv = rgb_to_hsv(*rgb)
    rng_ = HsvRange(hsv, hsv)
    m = hsv_mask(*(uniform(1, 1, c) for c in rgb), hsv_range=rng_)
    assert m.count == 1


def test_mask_shape_mismatch():
    with pytest.raises(ShapeError):
        hsv_mask(uniform(2, 2, 0), uniform(2, 2, 0), uniform(1, 4, 0))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 20), st.integers(0, 20))
def test_mask_monotone_in_range(seed, widen_lo, widen_hi):
    r = np.random.default_rng(seed)
    bands = [BandRaster(8, 8, r.integers(0, 256, 64).astype(np.float32)) for _ in range(3)]
    narrow = VEGETATION_HSV
    wide = HsvRange(
        tuple(max(0, x - widen_lo) for x in narrow.low),
        tuple(min(t, x + widen_hi) for x, t in zip(narrow.high, (179, 255, 255))),
    )
    assert wide.contains(narrow)
    a = hsv_mask(*bands, hsv_range=narrow).kept
    b = hsv_mask(*bands, hsv_range=wide).kept
    assert not np.any(a & ~b)


def test_visible_mask_uses_red_green_blue_bands():
    p = multispectral_profile()
    bands = [uniform(2, 2, 0.0) for _ in range(10)]
    bands[3] = uniform(2, 2, 1.0)  # 560 nm
    assert visible_mask(bands, p).count == 4
    bands[3] = uniform(2, 2, 0.0)
    bands[0] = uniform(2, 2, 1.0)  # 444 nm is not the blue channel
    assert visible_mask(bands, p).count == 0


def _brute_force_two_means(x):
    xs = np.sort(np.unique(x))
    best = None
    for t in (xs[:-1] + xs[1:]) / 2:
        lo, hi = x[x < t], x[x >= t]
        w = ((lo - lo.mean()) ** 2).sum() + ((hi - hi.mean()) ** 2).sum()
        if best is None or w < best:
            best = w
    return best


def test_kmeans_two_temperatures_keeps_cool_cluster():
    vals = np.array([25.0] * 8 + [35.0] * 8, dtype=np.float32)
    m = kmeans_segment_thermal(BandRaster(4, 4, vals), 0.5, k=2, seed=3)
    np.testing.assert_array_equal(m.kept, vals == 25.0)


def test_kmeans_tie_prefers_cooler():
    vals = np.array([40.0] * 4 + [20.0] * 4, dtype=np.float32)
    m = kmeans_segment_thermal(BandRaster(4, 2, vals), 0.5, seed=0)
    np.testing.assert_array_equal(m.kept, vals == 20.0)


def test_kmeans_uniform_is_degenerate():
    with pytest.raises(DegenerateInputError):
        kmeans_segment_thermal(uniform(3, 3, 30.0), 0.5)


def test_kmeans_ratio_bounds():
    with pytest.raises(ConfigError):
        kmeans_segment_thermal(BandRaster(2, 1, [1.0, 2.0]), 1.0)


def test_kmeans_deterministic(rng):
    vals = rng.normal(30, 3, 400).astype(np.float32)
    a = kmeans_segment_thermal(BandRaster(20, 20, vals), 0.3, seed=11)
    b = kmeans_segment_thermal(BandRaster(20, 20, vals), 0.3, seed=11)
    assert a == b


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_kmeans_wcss_non_increasing(seed, k):
    x = np.random.default_rng(seed).normal(size=60)
    res = kmeans_1d(x, k, seed)
    h = np.array(res.wcss_history)
    assert np.all(np.diff(h) <= 1e-9 * max(1.0, h[0]))


def test_kmeans_matches_brute_force_on_bimodal(rng):
    x = np.concatenate([rng.normal(20, 1, 50), rng.normal(32, 1, 70)])
    res = kmeans_1d(x, 2, seed=0)
    assert res.wcss_history[-1] == pytest.approx(_brute_force_two_means(x), rel=1e-9)


def test_mean_reflectance_examples():
    band = BandRaster(2, 1, [0.2, 0.4])
    both = PixelMask(2, 1, [True, True])
    first = PixelMask(2, 1, [True, False])
    assert mean_reflectance([band], both)[0] == pytest.approx(0.3)
    assert mean_reflectance([band], first)[0] == pytest.approx(0.2)
    with pytest.raises(EmptyMaskError):
        mean_reflectance([band], PixelMask(2, 1, [False, False]))


def test_mean_reflectance_shape_mismatch():
    with pytest.raises(ShapeError):
        mean_reflectance([BandRaster(3, 1, [0, 0, 0])], PixelMask(2, 1, [True, True]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mean_reflectance_permutation_invariant(seed):
    r = np.random.default_rng(seed)
    vals = r.random(30).astype(np.float32)
    keep = r.random(30) < 0.6
    keep[0] = True
    perm = r.permutation(30)
    a = mean_reflectance([BandRaster(30, 1, vals)], PixelMask(30, 1, keep))[0]
    b = mean_reflectance([BandRaster(30, 1, vals[perm])], PixelMask(30, 1, keep[perm]))[0]
    assert a == pytest.approx(b, rel=1e-12)


def test_mask_to_raster():
    m = PixelMask(2, 1, [True, False])
    np.testing.assert_array_equal(m.to_raster().values, [1.0, 0.0])
