"""Per-plot feature extraction: segment canopy, average it, derive indices."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .bandselect import HYPERSPECTRAL_BANDS, average_bands, averaged_band_centers
from .errors import ConfigError, DataError
from .features import FeatureTable
from .indices import (
    MULTISPECTRAL_INDICES,
    NON_VISIBLE_INDICES,
    VISIBLE_INDICES,
    compute_all_indices,
)
from .raster import SensorKind
from .segmentation import (
    VEGETATION_HSV,
    Spectrum,
    kmeans_segment_thermal,
    mean_reflectance,
    visible_mask,
)

log = logging.getLogger(__name__)

SENSOR_ORDER = ("phantom_rgb", "inspire_rgb", "handheld_rgb", "thermal", "multispectral",
                "hyperspectral")
RGB_VI_SOURCES = ("handheld_rgb", "phantom_rgb", "inspire_rgb")
THERMAL_COLUMN = "thermal:canopy_temp"


@dataclass
class ExtractOptions:
    hsv_range: object = VEGETATION_HSV
    gain: float = 1.0
    veg_ratio: Dict[str, float] = field(default_factory=dict)
    # estimate the thermal vegetation ratio from the optical mask when no ratio is given
    veg_ratio_from_mask: bool = False
    kmeans_seed: int = 0
    literature_indices: bool = False


def _fmt_nm(c):
    c = float(c)
    return str(int(c)) if c.is_integer() else repr(c)


def _sensors_present(dataset):
    seen = {s for r in dataset.records for s in r.rasters}
    known = [s for s in SENSOR_ORDER if s in seen]
    return known + sorted(seen - set(known))


def feature_columns(dataset):
    """Column names, grouped by sensor and then by index family."""
    sensors = _sensors_present(dataset)
    cols = []
    for s in sensors:
        p = dataset.profiles[s]
        if p.kind is SensorKind.THERMAL:
            cols.append(THERMAL_COLUMN)
        elif p.kind is SensorKind.HYPERSPECTRAL:
            cols.extend(f"{s}:{_fmt_nm(c)}" for c in averaged_band_centers())
        else:
            cols.extend(f"{s}:{_fmt_nm(c)}" for c in p.centers)
    if "multispectral" in sensors:
        cols.extend(f"vi_multispectral:{i.value}" for i in MULTISPECTRAL_INDICES)
    if "hyperspectral" in sensors:
        cols.extend(f"vi_hyperspectral:{i.value}" for i in NON_VISIBLE_INDICES)
    if _rgb_vi_source(sensors):
        cols.extend(f"vi_rgb_based:{i.value}" for i in VISIBLE_INDICES)
    return cols


def _rgb_vi_source(sensors):
    for s in RGB_VI_SOURCES:
        if s in sensors:
            return s
    return None


def extract_record(record, profiles, options, sensors):
    """Feature dict for one plot at one time point; raises DataError on failure."""
    feats = {}
    masks = {}
    spectra = {}
    for s in sensors:
        if s not in record.rasters:
            continue
        p = profiles[s]
        bands = record.rasters[s]
        if p.kind is SensorKind.THERMAL:
            continue
        if p.kind is SensorKind.HYPERSPECTRAL:
            spec = Spectrum(p, [b.values[0] for b in bands])
            if spec.values.size == HYPERSPECTRAL_BANDS:
                for c, v in zip(averaged_band_centers(), average_bands(spec).values):
                    feats[f"{s}:{_fmt_nm(c)}"] = float(v)
        else:
            mask = visible_mask(bands, p, options.hsv_range, options.gain)
            masks[s] = mask
            spec = mean_reflectance(bands, mask, p)
            for c, v in zip(p.centers, spec.values):
                feats[f"{s}:{_fmt_nm(c)}"] = float(v)
        spectra[s] = spec

    for s in sensors:
        p = profiles[s]
        if p.kind is not SensorKind.THERMAL or s not in record.rasters:
            continue
        ratio = options.veg_ratio.get(record.time_point)
        if ratio is None and options.veg_ratio_from_mask and masks:
            m = next(iter(masks.values()))
            ratio = m.count / (m.width * m.height)
        if ratio is None:
            raise ConfigError(f"no thermal vegetation ratio configured for {record.time_point}")
        thermal = record.rasters[s][0]
        mask = kmeans_segment_thermal(thermal, ratio, seed=options.kmeans_seed)
        feats[THERMAL_COLUMN] = float(mean_reflectance([thermal], mask)[0])

    lit = options.literature_indices
    if "multispectral" in spectra:
        vec = compute_all_indices(spectra["multispectral"], MULTISPECTRAL_INDICES, literature=lit)
        feats.update({f"vi_multispectral:{k}": v for k, v in vec.as_dict().items()})
    if "hyperspectral" in spectra:
        vec = compute_all_indices(spectra["hyperspectral"], NON_VISIBLE_INDICES, literature=lit)
        feats.update({f"vi_hyperspectral:{k}": v for k, v in vec.as_dict().items()})
    src = _rgb_vi_source([s for s in sensors if s in spectra])
    if src:
        vec = compute_all_indices(spectra[src], VISIBLE_INDICES, literature=lit)
        feats.update({f"vi_rgb_based:{k}": v for k, v in vec.as_dict().items()})
    return feats


def extract_features(dataset, options=None):
    """One FeatureTable row per record.

    A record that fails keeps its metadata, gets NaN features and a status
    string naming the error; the caller decides whether that is fatal.
    """
    options = options or ExtractOptions()
    sensors = _sensors_present(dataset)
    columns = feature_columns(dataset)
    index = {c: j for j, c in enumerate(columns)}
    values = np.full((len(dataset.records), len(columns)), np.nan)
    status = []
    for i, rec in enumerate(dataset.records):
        try:
            feats = extract_record(rec, dataset.profiles, options, sensors)
        except DataError as exc:
            log.warning("plot %s (%s): %s", rec.plot_id, rec.time_point, exc)
            status.append(f"{type(exc).__name__}: {exc}".replace("\n", " "))
            continue
        missing = [c for c in columns if c not in feats and c.split(":", 1)[0] in rec.rasters]
        for c, v in feats.items():
            values[i, index[c]] = v
        absent = [s for s in sensors if s not in rec.rasters]
        status.append(f"MissingModality: {','.join(absent)}" if absent else "")
        if missing:
            status[-1] = f"Incomplete: {','.join(missing[:5])}"
    return FeatureTable(
        [r.plot_id for r in dataset.records],
        [r.time_point for r in dataset.records],
        [r.wilt_score for r in dataset.records],
        [r.growth_stage for r in dataset.records],
        status,
        columns,
        values,
    )
