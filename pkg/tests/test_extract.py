import numpy as np
import pytest

from wiltscan.errors import ConfigError
from wiltscan.extract import (
    THERMAL_COLUMN,
    ExtractOptions,
    extract_features,
    feature_columns,
)
from wiltscan.features import read_features_csv, write_features_csv
from wiltscan.raster import BandRaster, default_profiles, load_dataset, load_plot_manifest, write_band_raster

OPTS = ExtractOptions(veg_ratio={"T1": 0.5, "T2": 0.5, "T3": 0.5})


def _dataset(root):
    return load_dataset(load_plot_manifest(root / "manifest.csv"), default_profiles())


def test_columns_grouped_by_sensor(small_dataset):
    root, _ = small_dataset
    cols = feature_columns(_dataset(root))
    groups = []
    for c in cols:
        g = c.split(":")[0]
        if g not in groups:
            groups.append(g)
    assert groups == ["phantom_rgb", "inspire_rgb", "handheld_rgb", "thermal", "multispectral",
                      "hyperspectral", "vi_multispectral", "vi_hyperspectral", "vi_rgb_based"]
    assert sum(c.startswith("multispectral:") for c in cols) == 10
    assert sum(c.startswith("hyperspectral:") for c in cols) == 214
    assert sum(c.startswith("vi_multispectral:") for c in cols) == 12
    assert sum(c.startswith("vi_hyperspectral:") for c in cols) == 18
    assert sum(c.startswith("vi_rgb_based:") for c in cols) == 8
    assert THERMAL_COLUMN in cols


def test_features_track_ground_truth(small_dataset):
    root, gt = small_dataset
    table = extract_features(_dataset(root), OPTS)
    assert all(s == "" for s in table.status)
    assert np.isfinite(table.values).all()
    assert len(table.at_time_point("T2")) == 12
    j = table.names.index("multispectral:717")
    t = table.names.index(THERMAL_COLUMN)
    for i, (pid, tp) in enumerate(zip(table.plot_ids, table.time_points)):
        truth = gt.plots[pid]
        # 717 nm is band 7 of the multispectral profile
        assert table.values[i, j] == pytest.approx(truth.mean_spectra[(tp, "multispectral")][7], abs=0.01)
        assert table.values[i, t] == pytest.approx(truth.canopy_temperature[tp], abs=0.05)


def test_extraction_is_deterministic(small_dataset, tmp_path):
    root, _ = small_dataset
    write_features_csv(extract_features(_dataset(root), OPTS), tmp_path / "a.csv")
    write_features_csv(extract_features(_dataset(root), OPTS), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    back = read_features_csv(tmp_path / "a.csv")
    assert back.names == extract_features(_dataset(root), OPTS).names


def test_missing_thermal_ratio_is_config_error(small_dataset):
    root, _ = small_dataset
    ds = _dataset(root)
    with pytest.raises(ConfigError):
        extract_features(ds, ExtractOptions())
    table = extract_features(ds, ExtractOptions(veg_ratio_from_mask=True))
    assert all(s == "" for s in table.status)


def test_all_soil_plot_is_flagged(small_dataset, tmp_path):
    import shutil
    root, _ = small_dataset
    copy = tmp_path / "d"
    shutil.copytree(root, copy)
    for f in (copy / "rasters" / "T1" / "P0002").glob("*_*.bras"):
        write_band_raster(BandRaster(12, 12, np.zeros(144)), f)
    table = extract_features(_dataset(copy), OPTS)
    bad = [i for i, (p, t) in enumerate(zip(table.plot_ids, table.time_points)) if (p, t) == ("P0002", "T1")]
    assert len(bad) == 1
    assert table.status[bad[0]].startswith("EmptyMaskError")
    assert np.isnan(table.values[bad[0]]).all()
    assert sum(1 for s in table.status if s) == 1


def test_missing_modality_marked(small_dataset, tmp_path):
    import shutil
    root, _ = small_dataset
    copy = tmp_path / "m"
    shutil.copytree(root, copy)
    lines = (copy / "manifest.csv").read_text().splitlines()
    keep = [ln for ln in lines if not (",P0003," in f",{ln}," and ",thermal," in ln and ",T2," in ln)]
    (copy / "manifest.csv").write_text("\n".join(keep) + "\n")
    table = extract_features(_dataset(copy), OPTS)
    i = next(i for i, (p, t) in enumerate(zip(table.plot_ids, table.time_points)) if (p, t) == ("P0003", "T2"))
    assert table.status[i] == "MissingModality: thermal"
    assert np.isnan(table.values[i, table.names.index(THERMAL_COLUMN)])
    assert np.isfinite(table.values[i, table.names.index("multispectral:717")])
