"""Band rasters, sensor profiles, plot manifests and dataset assembly.

BRAS container layout (all little-endian)::

    bytes 0-3   b"BRAS"
    bytes 4-7   u32 width
    bytes 8-11  u32 height
    bytes 12-   width*height f32, row-major
"""
import csv
import io
import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .errors import (
    DataError,
    DuplicateError,
    FormatError,
    IOFailure,
    ParseError,
    ProfileError,
    RangeError,
    SchemaError,
    ShapeError,
    TruncationError,
)

MAGIC = b"BRAS"
HEADER = struct.Struct("<4sII")

TIME_POINTS = ("T1", "T2", "T3")
DAYS_AFTER_PLANTING = {"T1": 46, "T2": 65, "T3": 81}

MANIFEST_COLUMNS = [
    "plot_id", "time_point", "wilt_score", "growth_stage", "sensor", "band_index", "raster_path",
]

# band_index value marking a single 1xN raster that packs a whole spectrum
PACKED = -1


@dataclass(frozen=True, eq=False)
class BandRaster:
    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float32).ravel())
        object.__setattr__(self, "values", vals)
        if self.width <= 0 or self.height <= 0:
            raise ShapeError(f"raster dimensions must be positive, got {self.width}x{self.height}")
        if vals.size != self.width * self.height:
            raise ShapeError(
                f"{vals.size} values for a {self.width}x{self.height} raster"
            )
        if np.isnan(vals).any():
            raise DataError("raster contains NaN values")

    @classmethod
    def from_array(cls, array):
        array = np.asarray(array)
        if array.ndim != 2:
            raise ShapeError("raster array must be 2-D")
        return cls(array.shape[1], array.shape[0], array)

    @property
    def array(self):
        return self.values.reshape(self.height, self.width)

    def __eq__(self, other):
        if not isinstance(other, BandRaster):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.values.tobytes() == other.values.tobytes()
        )


def encode_band_raster(raster):
    return HEADER.pack(MAGIC, raster.width, raster.height) + raster.values.astype("<f4").tobytes()


def decode_band_raster(data, source="<bytes>"):
    if len(data) < HEADER.size:
        raise FormatError(f"{source}: shorter than the 12-byte header")
    magic, width, height = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r}")
    if width == 0 or height == 0:
        raise FormatError(f"{source}: zero dimension {width}x{height}")
    payload = data[HEADER.size:]
    expected = 4 * width * height
    if len(payload) != expected:
        raise TruncationError(
            f"{source}: header declares {width}x{height} ({expected} bytes), payload has {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    if np.isnan(values).any():
        raise DataError(f"{source}: payload contains NaN")
    return BandRaster(width, height, values)


def read_band_raster(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IOFailure(f"cannot read raster {path}: {exc}") from exc
    return decode_band_raster(data, str(path))


def write_band_raster(raster, path):
    if not isinstance(raster, BandRaster):
        raise ShapeError("write_band_raster expects a BandRaster")
    try:
        Path(path).write_bytes(encode_band_raster(raster))
    except OSError as exc:
        raise IOFailure(f"cannot write raster {path}: {exc}") from exc


class SensorKind(str, Enum):
    RGB = "rgb"
    MULTISPECTRAL = "multispectral"
    HYPERSPECTRAL = "hyperspectral"
    THERMAL = "thermal"


@dataclass(frozen=True)
class BandDefinition:
    center: float
    width: float

    def __post_init__(self):
        if not self.center > 0 or not self.width > 0:
            raise ProfileError(f"band center and width must be positive: {self}")


@dataclass(frozen=True)
class SensorProfile:
    name: str
    kind: SensorKind
    bands: Tuple[BandDefinition, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", SensorKind(self.kind))
        object.__setattr__(self, "bands", tuple(self.bands))
        centers = [b.center for b in self.bands]
        if not centers:
            raise ProfileError(f"profile {self.name!r} has no bands")
        if any(b <= a for a, b in zip(centers, centers[1:])):
            raise ProfileError(f"profile {self.name!r}: band centers must be strictly increasing")
        if self.kind is SensorKind.RGB and len(self.bands) != 3:
            raise ProfileError(f"rgb profile {self.name!r} must have exactly 3 bands")
        if self.kind is SensorKind.THERMAL and len(self.bands) != 1:
            raise ProfileError(f"thermal profile {self.name!r} must have exactly 1 band")

    @cached_property
    def centers(self):
        c = np.array([b.center for b in self.bands], dtype=np.float64)
        c.flags.writeable = False
        return c

    def __len__(self):
        return len(self.bands)

    def to_dict(self):
        return {
            "name": self.name,
            "kind": self.kind.value,
            "bands": [{"center_nm": b.center, "width_nm": b.width} for b in self.bands],
        }


def profile_from_dict(d):
    try:
        bands = [BandDefinition(float(b["center_nm"]), float(b["width_nm"])) for b in d["bands"]]
        return SensorProfile(d["name"], SensorKind(d["kind"]), tuple(bands))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ProfileError):
            raise
        raise SchemaError(f"invalid sensor profile: {exc}") from exc


def load_sensor_profile(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read profile {path}: {exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return profile_from_dict(d)


def save_sensor_profile(profile, path):
    try:
        Path(path).write_text(json.dumps(profile.to_dict(), indent=2) + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write profile {path}: {exc}") from exc


MULTISPECTRAL_BANDS = [
    (444, 28), (475, 32), (531, 14), (560, 27), (650, 16),
    (668, 14), (705, 10), (717, 12), (740, 18), (842, 57),
]


def multispectral_profile(name="multispectral"):
    return SensorProfile(
        name, SensorKind.MULTISPECTRAL,
        tuple(BandDefinition(c, w) for c, w in MULTISPECTRAL_BANDS),
    )


def hyperspectral_profile(name="hyperspectral"):
    return SensorProfile(
        name, SensorKind.HYPERSPECTRAL,
        tuple(BandDefinition(float(c), 1.0) for c in range(350, 2501)),
    )


def thermal_profile(name="thermal"):
    return SensorProfile(name, SensorKind.THERMAL, (BandDefinition(10500.0, 6000.0),))


def rgb_profile(name):
    return SensorProfile(
        name, SensorKind.RGB,
        (BandDefinition(450.0, 100.0), BandDefinition(550.0, 100.0), BandDefinition(650.0, 100.0)),
    )


def default_profiles():
    profiles = [
        rgb_profile("phantom_rgb"),
        rgb_profile("inspire_rgb"),
        rgb_profile("handheld_rgb"),
        thermal_profile(),
        multispectral_profile(),
        hyperspectral_profile(),
    ]
    return {p.name: p for p in profiles}


@dataclass(frozen=True)
class ManifestEntry:
    plot_id: str
    time_point: str
    wilt_score: int
    growth_stage: str
    sensor: str
    band_index: int
    raster_path: str

    @property
    def days_after_planting(self):
        return DAYS_AFTER_PLANTING[self.time_point]


@dataclass
class PlotManifest:
    entries: List[ManifestEntry]
    base_dir: Path = field(default_factory=Path)


def _parse_int(text, what, line):
    try:
        return int(text)
    except ValueError:
        raise SchemaError(f"line {line}: {what} {text!r} is not an integer") from None


def parse_plot_manifest(text, base_dir="."):
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("manifest is empty; header row required") from None
    header = [h.strip() for h in header]
    missing = [c for c in MANIFEST_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"manifest missing columns: {', '.join(missing)}")
    col = {name: header.index(name) for name in MANIFEST_COLUMNS}

    entries = []
    seen = set()
    meta = {}
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise SchemaError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        get = lambda name: row[col[name]].strip()  # noqa: E731
        tp = get("time_point")
        if tp not in TIME_POINTS:
            raise SchemaError(f"line {line}: time_point {tp!r} not in {TIME_POINTS}")
        score = _parse_int(get("wilt_score"), "wilt_score", line)
        if not 1 <= score <= 6:
            raise RangeError(f"line {line}: wilt_score {score} outside 1-6")
        band = _parse_int(get("band_index"), "band_index", line)
        if band < PACKED:
            raise SchemaError(f"line {line}: band_index {band} is negative")
        entry = ManifestEntry(
            get("plot_id"), tp, score, get("growth_stage"), get("sensor"), band, get("raster_path"),
        )
        key = (entry.plot_id, tp, entry.sensor, band)
        if key in seen:
            raise DuplicateError(
                f"line {line}: duplicate raster for plot {entry.plot_id} at {tp} "
                f"({entry.sensor} band {band})"
            )
        seen.add(key)
        plot_key = (entry.plot_id, tp)
        if plot_key in meta and meta[plot_key] != (score, entry.growth_stage):
            raise DuplicateError(
                f"line {line}: plot {entry.plot_id} at {tp} has conflicting wilt score or growth stage"
            )
        meta[plot_key] = (score, entry.growth_stage)
        entries.append(entry)
    return PlotManifest(entries, Path(base_dir))


def load_plot_manifest(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read manifest {path}: {exc}") from exc
    return parse_plot_manifest(text, path.parent)


def write_plot_manifest(entries, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_COLUMNS)
    for e in entries:
        w.writerow([e.plot_id, e.time_point, e.wilt_score, e.growth_stage, e.sensor,
                    e.band_index, e.raster_path])
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise IOFailure(f"cannot write manifest {path}: {exc}") from exc


@dataclass
class PlotRecord:
    plot_id: str
    time_point: str
    wilt_score: int
    growth_stage: str
    rasters: Dict[str, List[BandRaster]] = field(default_factory=dict)

    @property
    def days_after_planting(self):
        return DAYS_AFTER_PLANTING[self.time_point]


@dataclass
class PlotDataset:
    records: List[PlotRecord]
    profiles: Dict[str, SensorProfile]

    def __len__(self):
        return len(self.records)

    def by_time_point(self, time_point):
        return [r for r in self.records if r.time_point == time_point]

    def time_points(self):
        return [tp for tp in TIME_POINTS if any(r.time_point == tp for r in self.records)]


def _unpack_spectrum(raster, profile, plot_id):
    if raster.values.size != len(profile):
        raise ProfileError(
            f"plot {plot_id}: packed {profile.name} raster holds {raster.values.size} values, "
            f"profile has {len(profile)} bands"
        )
    return [BandRaster(1, 1, raster.values[i: i + 1]) for i in range(len(profile))]


def load_dataset(manifest, profiles):
    """Read every raster in ``manifest`` into PlotRecords, in manifest order."""
    if isinstance(profiles, (list, tuple)):
        profiles = {p.name: p for p in profiles}
    grouped = {}
    order = []
    for e in manifest.entries:
        key = (e.plot_id, e.time_point)
        if key not in grouped:
            grouped[key] = PlotRecord(e.plot_id, e.time_point, e.wilt_score, e.growth_stage)
            grouped[key].rasters = {}
            order.append(key)
        grouped[key].rasters.setdefault(e.sensor, []).append(e)

    records = []
    for key in order:
        rec = grouped[key]
        loaded = {}
        for sensor, entries in rec.rasters.items():
            if sensor not in profiles:
                raise ProfileError(f"plot {rec.plot_id}: no sensor profile named {sensor!r}")
            profile = profiles[sensor]
            entries = sorted(entries, key=lambda e: e.band_index)
            rasters = []
            for e in entries:
                path = Path(e.raster_path)
                if not path.is_absolute():
                    path = manifest.base_dir / path
                try:
                    rasters.append(read_band_raster(path))
                except IOFailure as exc:
                    raise IOFailure(f"plot {rec.plot_id} ({rec.time_point}, {sensor}): {exc}") from exc
            indices = [e.band_index for e in entries]
            if indices == [PACKED]:
                rasters = _unpack_spectrum(rasters[0], profile, rec.plot_id)
            elif indices != list(range(len(profile))):
                raise ProfileError(
                    f"plot {rec.plot_id} ({rec.time_point}): {sensor} has band indices "
                    f"{indices[:12]}{'...' if len(indices) > 12 else ''}; profile expects "
                    f"0..{len(profile) - 1}"
                )
            else:
                shapes = {(r.width, r.height) for r in rasters}
                if len(shapes) > 1:
                    raise ProfileError(f"plot {rec.plot_id}: {sensor} bands differ in size")
            loaded[sensor] = rasters
        rec.rasters = loaded
        records.append(rec)
    return PlotDataset(records, dict(profiles))
