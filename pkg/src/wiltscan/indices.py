"""Vegetation indices over mean plot spectra.

Each index names the wavelengths it reads; those are mapped onto the nearest
band of the spectrum's sensor profile within a tolerance. ``BLUE`` is 475 nm
on multispectral profiles and 450 nm elsewhere.
"""
import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List

import numpy as np

from .errors import (
    AggregateIndexError,
    IOFailure,
    NumericDomainError,
    ProfileError,
    ShapeError,
    UnresolvableWavelengthError,
)
from .raster import SensorKind

DEFAULT_TOLERANCE = 65.0


class VegetationIndexId(str, Enum):
    NDVI = "NDVI"
    PRI = "PRI"
    RARSa = "RARSa"
    RARSb = "RARSb"
    RARSc = "RARSc"
    RDVI = "RDVI"
    EVI = "EVI"
    GCI = "GCI"
    MSAVI = "MSAVI"
    NDRE = "NDRE"
    RECI = "RECI"
    REV = "REV"
    ARI = "ARI"
    NDLI = "NDLI"
    NMDI = "NMDI"
    NWI = "NWI"
    PSRI = "PSRI"
    VREI2 = "VREI2"
    RGBVI = "RGBVI"
    VARI = "VARI"
    GLI = "GLI"
    MGRVI = "MGRVI"
    ExB = "ExB"
    ExR = "ExR"
    ExG = "ExG"
    ExGR = "ExGR"

    @property
    def visible_only(self):
        return self in VISIBLE_INDICES


V = VegetationIndexId
ALL_INDICES = tuple(V)
VISIBLE_INDICES = (V.RGBVI, V.VARI, V.GLI, V.MGRVI, V.ExB, V.ExR, V.ExG, V.ExGR)
NON_VISIBLE_INDICES = tuple(i for i in ALL_INDICES if i not in VISIBLE_INDICES)
# the twelve indices reported for the multispectral camera
MULTISPECTRAL_INDICES = (
    V.NDVI, V.PRI, V.RARSa, V.RARSb, V.RDVI, V.EVI, V.GCI, V.MSAVI, V.NDRE, V.RECI, V.REV, V.ARI,
)

WAVELENGTHS = {
    V.NDVI: (780, 670),
    V.PRI: (531, 570),
    V.RARSa: (675, 700),
    V.RARSb: (675, 650, 700),
    V.RARSc: (760, 500),
    V.RDVI: (800, 670),
    V.EVI: (800, 670, "BLUE"),
    V.GCI: (800, 570),
    V.MSAVI: (800, 670),
    V.NDRE: (790, 720),
    V.RECI: (800, 740),
    V.REV: (740, 670),
    V.ARI: (570, 740),
    V.NDLI: (1754, 1680),
    V.NMDI: (860, 1640, 2130),
    V.NWI: (970, 900),
    V.PSRI: (680, 500, 750),
    V.VREI2: (734, 747, 715, 726),
    V.RGBVI: (570, 450, 670),
    V.VARI: (570, 670, 450),
    V.GLI: (570, 670, 450),
    V.MGRVI: (570, 670),
    V.ExB: (450, 570, 670),
    V.ExR: (670, 570, 450),
    V.ExG: (570, 670, 450),
    V.ExGR: (570, 670, 450),
}


@dataclass(frozen=True)
class BandResolution:
    requested: float
    index: int
    center: float
    offset: float


def resolve_band(profile, wavelength, tolerance=DEFAULT_TOLERANCE):
    """Nearest band to ``wavelength``; ties go to the lower center."""
    if profile.kind is SensorKind.THERMAL:
        raise ProfileError("thermal profiles carry no reflectance bands")
    centers = profile.centers
    offsets = np.abs(centers - float(wavelength))
    i = int(np.argmin(offsets))
    if offsets[i] > tolerance:
        raise UnresolvableWavelengthError(wavelength, profile.name, tolerance)
    return BandResolution(float(wavelength), i, float(centers[i]), float(offsets[i]))


def blue_wavelength(profile):
    return 475 if profile.kind is SensorKind.MULTISPECTRAL else 450


def _div(num, den, index_id):
    if den == 0:
        raise NumericDomainError(index_id)
    return num / den


def _sqrt(x, index_id):
    if x < 0:
        raise NumericDomainError(index_id, "square root of a negative value")
    return math.sqrt(x)


def _log10(x, index_id):
    if x <= 0:
        raise NumericDomainError(index_id, "logarithm of a non-positive value")
    return math.log10(x)


def _evaluate(i, p, literature):
    """Evaluate index ``i`` given band reflectances ``p`` keyed by wavelength."""
    if i is V.NDVI:
        return _div(p[780] - p[670], p[780] + p[670], i)
    if i is V.PRI:
        return _div(p[531] - p[570], p[531] + p[570], i)
    if i is V.RARSa:
        return _div(p[675], p[700], i)
    if i is V.RARSb:
        return _div(p[675], p[650] * p[700], i)
    if i is V.RARSc:
        return _div(p[760], p[500], i)
    if i is V.RDVI:
        return _div(p[800] - p[670], _sqrt(p[800] + p[670], i), i)
    if i is V.EVI:
        return 2.5 * _div(p[800] - p[670], p[800] + 6 * p[670] - 7.5 * p["BLUE"] + 1, i)
    if i is V.GCI:
        return _div(p[800], p[570], i) - 1
    if i is V.MSAVI:
        a = 2 * p[800] + 1
        return (a - _sqrt(a * a - 8 * (p[800] - p[670]), i)) / 2
    if i is V.NDRE:
        return _div(p[790] - p[720], p[790] + p[720], i)
    if i is V.RECI:
        return _div(p[800], p[740], i) - 1
    if i is V.REV:
        return _div(p[740], _sqrt(p[670], i), i)
    if i is V.ARI:
        return _div(1, p[570], i) - _div(1, p[740], i)
    if i is V.NDLI:
        return _log10(_div(1, p[1754], i), i) - _log10(_div(1, p[1680], i), i)
    if i is V.NMDI:
        swir = p[1640] - p[2130]
        return _div(p[860] - swir, p[860] + swir, i)
    if i is V.NWI:
        return _div(p[970] - p[900], p[970] + p[900], i)
    if i is V.PSRI:
        return _div(p[680] - p[500], p[750], i)
    if i is V.VREI2:
        return _div(p[734] - p[747], p[715] + p[726], i)

    g, r, b = p[570], p[670], p.get(450)
    if i is V.RGBVI:
        return _div(g * g - b * r, g * g + b * r, i)
    if i is V.VARI:
        return _div(g - r, g + r - b, i)
    if i is V.GLI:
        den = 2 * g + r + b if literature else -r - b
        return _div(2 * g - r - b, den, i)
    if i is V.MGRVI:
        den = g * g + r * r if literature else r * r + r * r
        return _div(g * g - r * r, den, i)
    if i is V.ExB:
        return _div(1.4 * b - g, g + r + b, i)
    if i is V.ExR:
        return _div(1.4 * r - g, g + r + b, i)
    if i is V.ExG:
        return 2 * g - r - b
    if i is V.ExGR:
        return (2 * g - r - b) - _div(1.4 * r - g, g + r + b, i)
    raise ValueError(f"unknown index {i!r}")


def index_bands(profile, index_id, tolerance=DEFAULT_TOLERANCE):
    """Map each wavelength token of ``index_id`` to its band resolution."""
    index_id = V(index_id)
    out = {}
    for wl in WAVELENGTHS[index_id]:
        nm = blue_wavelength(profile) if wl == "BLUE" else wl
        out[wl] = resolve_band(profile, nm, tolerance)
    return out


def compute_index(spectrum, index_id, tolerance=DEFAULT_TOLERANCE, literature=False):
    """Evaluate one index on ``spectrum``.

    ``literature=True`` swaps in the published GLI and MGRVI denominators in
    place of the tabulated ones.
    """
    index_id = V(index_id)
    bands = index_bands(spectrum.profile, index_id, tolerance)
    p = {wl: float(spectrum.values[res.index]) for wl, res in bands.items()}
    return float(_evaluate(index_id, p, literature))


@dataclass
class FeatureVector:
    names: List[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.names) != self.values.size:
            raise ShapeError("names and values differ in length")
        if len(set(self.names)) != len(self.names):
            raise ShapeError("feature names must be unique")

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


def compute_all_indices(spectrum, ids, tolerance=DEFAULT_TOLERANCE, literature=False):
    """Evaluate ``ids`` in canonical table order; any failure aborts with all offenders listed."""
    wanted = {V(i) for i in ids}
    if not wanted:
        raise ValueError("no indices requested")
    ordered = [i for i in ALL_INDICES if i in wanted]
    names, values, failures = [], [], {}
    for i in ordered:
        try:
            values.append(compute_index(spectrum, i, tolerance, literature))
            names.append(i.value)
        except (UnresolvableWavelengthError, NumericDomainError, ProfileError) as exc:
            failures[i.value] = str(exc)
    if failures:
        raise AggregateIndexError(failures)
    return FeatureVector(names, values)


def write_feature_vectors_csv(vectors, path, row_ids=None):
    """Write vectors sharing one name list as CSV with a header of index names."""
    if not vectors:
        raise ValueError("nothing to write")
    names = vectors[0].names
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((["id"] if row_ids else []) + names)
    for k, v in enumerate(vectors):
        if v.names != names:
            raise ShapeError("feature vectors have different columns")
        w.writerow(([row_ids[k]] if row_ids else []) + [repr(float(x)) for x in v.values])
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
