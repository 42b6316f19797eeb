import filecmp
import json
from statistics import NormalDist

import numpy as np
import pytest

from wiltscan.errors import ConfigError, IOFailure, ParseError
from wiltscan.raster import default_profiles, load_dataset, load_plot_manifest
from wiltscan.segmentation import kmeans_segment_thermal, mean_reflectance, visible_mask
from wiltscan.synth import (
    REGIONS,
    SynthConfig,
    TimePointSpec,
    config_from_dict,
    effective_sd,
    generate_synthetic_dataset,
    load_synth_config,
    oracle_bayes_accuracy,
)

SMALL = dict(n_plots_per_class=3, plot_size=10,
             sensors=("handheld_rgb", "thermal", "multispectral", "hyperspectral"))


def _load(gt):
    return load_dataset(load_plot_manifest(gt.manifest_path), default_profiles())


def test_record_counts(tmp_path):
    cfg = SynthConfig(n_plots_per_class=10, plot_size=6, sensors=("multispectral",))
    gt = generate_synthetic_dataset(cfg, tmp_path)
    ds = _load(gt)
    for tp in ("T1", "T2", "T3"):
        assert len(ds.by_time_point(tp)) == 20
    assert sorted(gt.classes().values()).count(0) == 10


def test_same_seed_gives_identical_trees(tmp_path):
    cfg = SynthConfig(**SMALL)
    generate_synthetic_dataset(cfg, tmp_path / "a")
    generate_synthetic_dataset(cfg, tmp_path / "b")
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")

    def same(c):
        return not (c.left_only or c.right_only or c.diff_files or c.funny_files) and all(
            same(s) for s in c.subdirs.values())

    # dircmp compares shallowly; confirm contents byte by byte too
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert same(cmp)
    assert all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)


def test_different_seed_changes_rasters(tmp_path):
    generate_synthetic_dataset(SynthConfig(**SMALL), tmp_path / "a")
    generate_synthetic_dataset(SynthConfig(**SMALL, seed=1), tmp_path / "b")
    f = "rasters/T1/P0001/multispectral_00.bras"
    assert (tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes()


def test_noiseless_limit_recovers_class_mean(tmp_path):
    tps = {tp: TimePointSpec(s.shifts, 1e-12, s.thermal_shift, s.growth_stage)
           for tp, s in SynthConfig().time_points.items()}
    cfg = SynthConfig(n_plots_per_class=2, plot_size=10, pixel_sd=0.0, soil_sd=0.0, time_points=tps,
                      sensors=("multispectral",))
    gt = generate_synthetic_dataset(cfg, tmp_path)
    ds = _load(gt)
    p = ds.profiles["multispectral"]
    for rec in ds.records:
        bands = rec.rasters["multispectral"]
        spec = mean_reflectance(bands, visible_mask(bands, p), p)
        want = cfg.class_mean(gt.plots[rec.plot_id].true_class, rec.time_point, p.centers)
        assert np.max(np.abs(spec.values - want)) < 1e-6


def test_hsv_mask_recovers_vegetation(tmp_path):
    cfg = SynthConfig(n_plots_per_class=4, sensors=("handheld_rgb", "phantom_rgb", "multispectral"))
    gt = generate_synthetic_dataset(cfg, tmp_path)
    ds = _load(gt)
    for rec in ds.records:
        for s, bands in rec.rasters.items():
            m = visible_mask(bands, ds.profiles[s])
            assert np.mean(m.kept == gt.vegetation_mask) >= 0.99


def test_thermal_kmeans_recovers_cool_canopy(tmp_path):
    cfg = SynthConfig(n_plots_per_class=3, sensors=("thermal",))
    gt = generate_synthetic_dataset(cfg, tmp_path)
    ratio = float(gt.vegetation_mask.mean())
    for rec in _load(gt).records:
        m = kmeans_segment_thermal(rec.rasters["thermal"][0], ratio)
        assert np.array_equal(m.kept, gt.vegetation_mask)
        temp = gt.plots[rec.plot_id].canopy_temperature[rec.time_point]
        assert float(mean_reflectance(rec.rasters["thermal"], m)[0]) == pytest.approx(temp, abs=0.05)


def test_vegetation_rows_match_soil_fraction():
    for size, frac in ((20, 0.5), (10, 0.3), (11, 0.7)):
        cfg = SynthConfig(plot_size=size, soil_fraction=frac)
        rows = cfg.vegetation_rows()
        assert len(rows) == round(size * (1 - frac)) and len(set(rows)) == len(rows)


def test_score_pools(tmp_path):
    gt = generate_synthetic_dataset(SynthConfig(n_plots_per_class=8, plot_size=4, sensors=("thermal",)),
                                    tmp_path)
    for t in gt.plots.values():
        assert t.wilt_scores["T3"] in ((1, 2) if t.true_class == 0 else (4, 5, 6))
    gt3 = generate_synthetic_dataset(
        SynthConfig(n_plots_per_class=4, classes=3, plot_size=4, sensors=("thermal",)), tmp_path / "3")
    assert {t.wilt_scores["T3"] for t in gt3.plots.values() if t.true_class == 1} == {3}


def test_config_validation():
    for bad in (dict(soil_fraction=0), dict(soil_fraction=1), dict(classes=4), dict(n_plots_per_class=0),
                dict(sensors=("lidar",)), dict(time_points={"T9": TimePointSpec()})):
        with pytest.raises(ConfigError):
            SynthConfig(**bad)
    with pytest.raises(ConfigError):
        TimePointSpec(noise_sd=0)
    with pytest.raises(ConfigError):
        TimePointSpec({"uv": 0.1})
    with pytest.raises(ConfigError):
        SynthConfig(time_points={"T1": TimePointSpec({"nir": 0.9})})


def test_config_file_roundtrip_and_errors(tmp_path):
    cfg = SynthConfig(**SMALL, seed=9)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert load_synth_config(p) == cfg
    p.write_text("{nope")
    with pytest.raises(ParseError):
        load_synth_config(p)
    with pytest.raises(IOFailure):
        load_synth_config(tmp_path / "missing.json")
    with pytest.raises(ConfigError):
        config_from_dict({"bogus": 1})


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    with pytest.raises(IOFailure):
        generate_synthetic_dataset(SynthConfig(**SMALL), blocker / "out")


def test_bayes_identical_means_is_half():
    tps = {"T1": TimePointSpec({}, 0.02)}
    acc = oracle_bayes_accuracy(SynthConfig(time_points=tps), n_draws=20_000)["T1"]
    assert acc.best_single_band == 0.5 and acc.full_spectrum == 0.5
    assert acc.monte_carlo == 0.5


def test_bayes_single_band_closed_form():
    # a red-edge shift of 4 effective SDs on each of the 705/717/740 nm bands
    cfg0 = SynthConfig(pixel_sd=0.0)
    sd = effective_sd(cfg0, "T1")
    tps = {"T1": TimePointSpec({"red_edge": -4 * sd}, 0.02)}
    cfg = SynthConfig(pixel_sd=0.0, time_points=tps)
    acc = oracle_bayes_accuracy(cfg)["T1"]
    want = NormalDist().cdf(2.0)
    assert acc.best_band_nm in (705.0, 717.0, 740.0)
    assert acc.full_spectrum == pytest.approx(NormalDist().cdf(2.0 * 3 ** 0.5), abs=1e-12)
    assert acc.best_single_band == pytest.approx(want, abs=1e-12)
    assert abs(acc.monte_carlo - acc.full_spectrum) <= 0.01


def test_bayes_full_spectrum_dominates_and_mc_agrees():
    for tp, acc in oracle_bayes_accuracy(SynthConfig()).items():
        assert acc.full_spectrum >= acc.best_single_band
        assert abs(acc.monte_carlo - acc.full_spectrum) <= 0.01, tp


def test_bayes_rejects_three_class():
    with pytest.raises(ConfigError):
        oracle_bayes_accuracy(SynthConfig(classes=3))


def test_regions_do_not_overlap():
    spans = sorted(REGIONS.values())
    assert all(a[1] < b[0] for a, b in zip(spans, spans[1:]))
