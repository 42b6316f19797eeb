"""Synthetic plot imagery with known class structure.

Every plot carries a mean canopy spectrum: a fixed vegetation curve plus a
class-dependent shift over named wavelength regions, plus plot-level Gaussian
noise. Pixels add independent noise on top. Soil pixels fill the rest of the
plot with a reddish spectrum that falls outside the vegetation hue window.
"""
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Dict, Tuple

import numpy as np

from ._seeding import derive_rng
from .errors import ConfigError, IOFailure, ParseError
from .raster import (
    PACKED,
    TIME_POINTS,
    BandRaster,
    ManifestEntry,
    SensorKind,
    default_profiles,
    save_sensor_profile,
    write_band_raster,
    write_plot_manifest,
)

# (nm, reflectance) anchors of the tolerant canopy, linearly interpolated
VEGETATION_ANCHORS = (
    (350, 0.05), (450, 0.10), (475, 0.10), (500, 0.12), (550, 0.30), (560, 0.30),
    (600, 0.20), (650, 0.12), (680, 0.10), (700, 0.20), (720, 0.35), (740, 0.45),
    (780, 0.55), (900, 0.58), (1300, 0.55), (1450, 0.30), (1650, 0.40), (1950, 0.15),
    (2200, 0.25), (2500, 0.10),
)
SOIL_ANCHORS = (
    (350, 0.10), (450, 0.15), (475, 0.15), (560, 0.20), (650, 0.35), (700, 0.38),
    (900, 0.42), (1650, 0.48), (2500, 0.40),
)

REGIONS = {
    "blue": (400, 499),
    "green": (500, 599),
    "red": (620, 690),
    "red_edge": (695, 750),
    "nir": (751, 1300),
    "swir": (1301, 2500),
}

TOLERANT_SCORES = (1, 2)
MODERATE_SCORES = (3,)
SUSCEPTIBLE_SCORES = (4, 5, 6)


def _interp(anchors, wavelengths):
    xs, ys = zip(*anchors)
    return np.interp(np.asarray(wavelengths, dtype=np.float64), xs, ys)


def region_of(wavelength):
    for name, (lo, hi) in REGIONS.items():
        if lo <= wavelength <= hi:
            return name
    return None


@dataclass(frozen=True)
class TimePointSpec:
    """Susceptible-minus-tolerant reflectance shift per region, plus plot-level noise."""

    shifts: Dict[str, float] = field(default_factory=dict)
    noise_sd: float = 0.02
    thermal_shift: float = 0.0
    growth_stage: str = "V6"

    def __post_init__(self):
        unknown = set(self.shifts) - set(REGIONS)
        if unknown:
            raise ConfigError(f"unknown spectral regions {sorted(unknown)}")
        if not self.noise_sd > 0:
            raise ConfigError("noise_sd must be positive")


def default_time_points():
    return {
        "T1": TimePointSpec({"red": 0.008, "red_edge": -0.02}, 0.02, 0.2, "V6"),
        "T2": TimePointSpec({"red": 0.012, "red_edge": -0.03, "nir": -0.04}, 0.02, 0.6, "R2"),
        "T3": TimePointSpec(
            {"green": -0.01, "red": 0.02, "red_edge": -0.05, "nir": -0.08}, 0.02, 1.0, "R4"
        ),
    }


@dataclass(frozen=True)
class SynthConfig:
    n_plots_per_class: int = 20
    classes: int = 2
    plot_size: int = 20
    soil_fraction: float = 0.5
    pixel_sd: float = 0.01
    soil_sd: float = 0.01
    time_points: Dict[str, TimePointSpec] = field(default_factory=default_time_points)
    canopy_temperature: float = 30.0
    thermal_sd: float = 0.5
    soil_temperature: float = 40.0
    sensors: Tuple[str, ...] = (
        "phantom_rgb", "inspire_rgb", "handheld_rgb", "thermal", "multispectral", "hyperspectral",
    )
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if self.n_plots_per_class < 1:
            raise ConfigError("n_plots_per_class must be >= 1")
        if self.classes not in (2, 3):
            raise ConfigError("classes must be 2 or 3")
        if self.plot_size < 4:
            raise ConfigError("plot_size must be >= 4")
        if not 0 < self.soil_fraction < 1:
            raise ConfigError("soil_fraction must lie strictly between 0 and 1")
        if self.pixel_sd < 0 or self.soil_sd < 0 or self.thermal_sd < 0:
            raise ConfigError("noise SDs must be non-negative")
        bad = [tp for tp in self.time_points if tp not in TIME_POINTS]
        if bad or not self.time_points:
            raise ConfigError(f"time points must be a non-empty subset of {TIME_POINTS}")
        unknown = set(self.sensors) - set(default_profiles())
        if unknown:
            raise ConfigError(f"unknown sensors {sorted(unknown)}")
        for tp in self.time_points:
            for cls in range(self.classes):
                spectrum = self.class_mean(cls, tp, np.arange(350, 2501))
                if spectrum.min() < 0 or spectrum.max() > 1:
                    raise ConfigError(f"{tp}: class {cls} mean spectrum leaves [0, 1]")

    @property
    def n_plots(self):
        return self.n_plots_per_class * self.classes

    def class_fraction(self, cls):
        return cls / (self.classes - 1)

    def class_mean(self, cls, time_point, wavelengths):
        """Noise-free reflectance of class ``cls`` at ``wavelengths``."""
        wl = np.atleast_1d(np.asarray(wavelengths, dtype=np.float64))
        out = _interp(VEGETATION_ANCHORS, wl)
        frac = self.class_fraction(cls)
        for region, delta in self.time_points[time_point].shifts.items():
            lo, hi = REGIONS[region]
            out = out + frac * delta * ((wl >= lo) & (wl <= hi))
        return out

    def vegetation_rows(self):
        """Row indices covered by canopy: two equal blocks, one per half of the plot."""
        h = self.plot_size
        k = max(1, min(h - 1, round(h * (1 - self.soil_fraction))))
        half = h // 2
        first = k // 2
        second = k - first
        rows = []
        for start, n, span in ((0, first, half), (half, second, h - half)):
            offset = start + (span - n) // 2
            rows.extend(range(offset, offset + n))
        return rows

    def vegetation_mask(self):
        m = np.zeros((self.plot_size, self.plot_size), dtype=bool)
        m[self.vegetation_rows(), :] = True
        return m.ravel()

    def to_dict(self):
        d = asdict(self)
        d["sensors"] = list(self.sensors)
        return d


def config_from_dict(d):
    try:
        d = dict(d)
        if "time_points" in d:
            d["time_points"] = {tp: TimePointSpec(**spec) for tp, spec in d["time_points"].items()}
        return SynthConfig(**d)
    except TypeError as exc:
        raise ConfigError(f"invalid synth config: {exc}") from exc


def load_synth_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read config {path}: {exc}") from exc
    try:
        return config_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


@dataclass
class PlotTruth:
    plot_id: str
    true_class: int
    wilt_scores: Dict[str, int]
    mean_spectra: Dict[Tuple[str, str], np.ndarray] = field(repr=False, default_factory=dict)
    canopy_temperature: Dict[str, float] = field(default_factory=dict)


@dataclass
class GroundTruth:
    plots: Dict[str, PlotTruth]
    vegetation_mask: np.ndarray
    manifest_path: Path

    def classes(self):
        return {p: t.true_class for p, t in self.plots.items()}

    def to_dict(self):
        return {
            "vegetation_mask_rows": [int(r) for r in np.flatnonzero(
                self.vegetation_mask.reshape(-1, int(math.isqrt(self.vegetation_mask.size))).any(axis=1))],
            "plots": {
                pid: {
                    "class": t.true_class,
                    "wilt_scores": t.wilt_scores,
                    "canopy_temperature": t.canopy_temperature,
                    "multispectral_mean": {
                        tp: v.tolist() for (tp, s), v in sorted(t.mean_spectra.items())
                        if s == "multispectral"
                    },
                }
                for pid, t in self.plots.items()
            },
        }


def _scores(cfg, cls, rng):
    if cfg.classes == 2:
        pool = TOLERANT_SCORES if cls == 0 else SUSCEPTIBLE_SCORES
    else:
        pool = (TOLERANT_SCORES, MODERATE_SCORES, SUSCEPTIBLE_SCORES)[cls]
    final = int(pool[rng.integers(len(pool))])
    return {"T1": 1, "T2": max(1, final - 1), "T3": final}


def _plot_spectrum(cfg, cls, tp, wavelengths, rng):
    mean = cfg.class_mean(cls, tp, wavelengths)
    noise = rng.normal(0.0, cfg.time_points[tp].noise_sd, size=mean.shape)
    return np.clip(mean + noise, 0.0, 1.0)


def _band_images(cfg, plot_mean, soil_mean, rng):
    """Pixel images (n_bands, n_pixels) with canopy rows and soil elsewhere."""
    veg = cfg.vegetation_mask()
    n = veg.size
    img = np.empty((plot_mean.size, n))
    img[:, veg] = plot_mean[:, None] + rng.normal(0.0, cfg.pixel_sd, size=(plot_mean.size, veg.sum())) \
        if cfg.pixel_sd > 0 else plot_mean[:, None]
    n_soil = n - int(veg.sum())
    img[:, ~veg] = soil_mean[:, None] + rng.normal(0.0, cfg.soil_sd, size=(soil_mean.size, n_soil)) \
        if cfg.soil_sd > 0 else soil_mean[:, None]
    return np.clip(img, 0.0, 1.0)


def generate_synthetic_dataset(config, out_dir):
    """Write manifest, profiles and rasters under ``out_dir``; return the ground truth."""
    out = Path(out_dir)
    profiles = default_profiles()
    try:
        (out / "profiles").mkdir(parents=True, exist_ok=True)
        (out / "rasters").mkdir(exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create output directory {out}: {exc}") from exc
    for name in config.sensors:
        save_sensor_profile(profiles[name], out / "profiles" / f"{name}.json")

    veg = config.vegetation_mask()
    size = config.plot_size
    tps = [tp for tp in TIME_POINTS if tp in config.time_points]
    entries, plots = [], {}
    for i in range(config.n_plots):
        cls = i % config.classes
        pid = f"P{i + 1:04d}"
        truth = PlotTruth(pid, cls, _scores(config, cls, derive_rng(config.seed, "scores", i)))
        plots[pid] = truth
        for tp in tps:
            spec = config.time_points[tp]
            rel = Path("rasters") / tp / pid
            (out / rel).mkdir(parents=True, exist_ok=True)
            for sensor in config.sensors:
                profile = profiles[sensor]
                rng = derive_rng(config.seed, "plot", i, tp, sensor)

                def emit(band_index, raster, stem):
                    path = rel / f"{stem}.bras"
                    write_band_raster(raster, out / path)
                    entries.append(ManifestEntry(pid, tp, truth.wilt_scores[tp], spec.growth_stage,
                                                 sensor, band_index, path.as_posix()))

                if profile.kind is SensorKind.THERMAL:
                    temp = (config.canopy_temperature + config.class_fraction(cls) * spec.thermal_shift
                            + rng.normal(0.0, config.thermal_sd))
                    truth.canopy_temperature[tp] = float(temp)
                    pix = np.where(veg, temp, config.soil_temperature)
                    pix = pix + rng.normal(0.0, 0.1, size=pix.size)
                    emit(0, BandRaster(size, size, pix), sensor)
                    continue
                centers = profile.centers
                plot_mean = _plot_spectrum(config, cls, tp, centers, rng)
                truth.mean_spectra[(tp, sensor)] = plot_mean
                if profile.kind is SensorKind.HYPERSPECTRAL:
                    emit(PACKED, BandRaster(len(centers), 1, plot_mean), sensor)
                    continue
                img = _band_images(config, plot_mean, _interp(SOIL_ANCHORS, centers), rng)
                for b in range(len(centers)):
                    emit(b, BandRaster(size, size, img[b]), f"{sensor}_{b:02d}")

    manifest = out / "manifest.csv"
    write_plot_manifest(entries, manifest)
    gt = GroundTruth(plots, veg, manifest)
    try:
        (out / "ground_truth.json").write_text(json.dumps(gt.to_dict(), sort_keys=True) + "\n")
        (out / "synth_config.json").write_text(json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write ground truth: {exc}") from exc
    return gt


@dataclass(frozen=True)
class BayesAccuracy:
    time_point: str
    best_single_band: float
    best_band_nm: float
    full_spectrum: float
    monte_carlo: float


def effective_sd(config, time_point):
    """SD of an extracted plot-mean band: plot noise plus averaged pixel noise."""
    n_veg = int(config.vegetation_mask().sum())
    return math.sqrt(config.time_points[time_point].noise_sd ** 2 + config.pixel_sd ** 2 / n_veg)


def oracle_bayes_accuracy(config, sensor="multispectral", n_draws=100_000):
    """Equal-prior Bayes accuracy of tolerant versus susceptible from ``sensor`` band means.

    Bands are independent Gaussians with a common SD, so the optimal rule is
    the linear discriminant and accuracy is Phi(D / 2) with D the Mahalanobis
    distance. A Monte Carlo draw of ``n_draws`` plots cross-checks it.
    """
    if config.classes != 2:
        raise ConfigError("the Bayes oracle supports two-class configs only")
    profile = default_profiles()[sensor]
    if profile.kind is SensorKind.THERMAL:
        raise ConfigError("the Bayes oracle needs a reflectance sensor")
    centers = profile.centers
    phi = NormalDist().cdf
    out = {}
    for tp in TIME_POINTS:
        if tp not in config.time_points:
            continue
        mu0 = config.class_mean(0, tp, centers)
        mu1 = config.class_mean(1, tp, centers)
        sd = effective_sd(config, tp)
        z = np.abs(mu1 - mu0) / sd
        best = int(np.argmax(z))
        d = float(np.sqrt(np.sum(z ** 2)))

        rng = derive_rng(config.seed, "bayes", tp)
        y = rng.integers(0, 2, size=n_draws)
        x = np.where(y[:, None] == 1, mu1, mu0) + rng.normal(0.0, sd, size=(n_draws, centers.size))
        w = mu1 - mu0
        pred = (x - (mu0 + mu1) / 2) @ w > 0
        mc = float(np.mean(pred == (y == 1))) if d > 0 else 0.5
        out[tp] = BayesAccuracy(tp, phi(z[best] / 2), float(centers[best]), phi(d / 2), mc)
    return out
