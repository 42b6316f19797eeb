"""Hyperspectral band averaging and wrapper band-subset selection."""
import csv
import io
import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ._seeding import derive_rng
from .errors import ConfigError, IOFailure, ShapeError
from .features import FeatureMatrix
from .forest import ForestConfig
from .ml import cross_validate, make_folds

HYPERSPECTRAL_START_NM = 350
HYPERSPECTRAL_BANDS = 2151
GROUP = 10
N_AVERAGED = 214


@dataclass
class AveragedSpectrum:
    values: np.ndarray
    source_ranges: List[Tuple[int, int]]

    @property
    def centers(self):
        return np.array([(a + b) / 2 for a, b in self.source_ranges])


def averaged_band_ranges():
    """Inclusive (first_nm, last_nm) covered by each of the 214 averaged bands."""
    first = HYPERSPECTRAL_START_NM + 1
    return [(first + GROUP * i, first + GROUP * i + GROUP - 1) for i in range(N_AVERAGED)]


def averaged_band_centers():
    return np.array([(a + b) / 2 for a, b in averaged_band_ranges()])


def average_bands(spectrum, append_rgb=False):
    """Reduce a 2151-band 350-2500 nm spectrum to 214 ten-band means.

    The first and last bands are dropped, groups of ten are averaged over the
    next 2140 bands and the 9-band remainder is discarded. ``append_rgb`` adds
    the raw 450/550/650 nm reflectances as three extra values.
    """
    values = np.asarray(getattr(spectrum, "values", spectrum), dtype=np.float64)
    if values.shape[-1] != HYPERSPECTRAL_BANDS:
        raise ShapeError(f"expected {HYPERSPECTRAL_BANDS} bands, got {values.shape[-1]}")
    core = values[..., 1: 1 + GROUP * N_AVERAGED]
    out = core.reshape(*values.shape[:-1], N_AVERAGED, GROUP).mean(axis=-1)
    ranges = averaged_band_ranges()
    if append_rgb:
        idx = [wl - HYPERSPECTRAL_START_NM for wl in (450, 550, 650)]
        out = np.concatenate([out, values[..., idx]], axis=-1)
        ranges = ranges + [(450, 450), (550, 550), (650, 650)]
    return AveragedSpectrum(out, ranges)


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    generations: int = 30
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate: Optional[float] = None
    subset_size: int = 5
    elitism: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.subset_size <= N_AVERAGED:
            raise ConfigError(f"subset_size must lie in 1..{N_AVERAGED}")
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2")
        if self.generations < 0 or self.tournament_size < 1 or self.elitism < 0:
            raise ConfigError("invalid GA configuration")

    @property
    def effective_mutation_rate(self):
        return 1.0 / self.subset_size if self.mutation_rate is None else self.mutation_rate


@dataclass
class GaResult:
    selected: Tuple[int, ...]
    fitness: float
    trace: List[float]
    evaluations: int
    cache: Dict[Tuple[int, ...], float] = field(repr=False, default_factory=dict)


def _matrix(features):
    if isinstance(features, FeatureMatrix):
        return features.values, features.labels
    return np.asarray(getattr(features, "values", features), dtype=np.float64), None


class _SubsetScorer:
    """Cross-validated accuracy of column subsets on one shared fold partition."""

    def __init__(self, X, labels, forest, cv_k, n_jobs=1):
        self.X = X
        self.labels = np.asarray(labels)
        self.forest = forest
        self.folds = make_folds(self.labels, cv_k, forest.seed)
        self.n_jobs = n_jobs
        self.cache = {}

    def report(self, subset):
        return cross_validate(self.X[:, list(subset)], self.labels, config=self.forest,
                              folds=self.folds)

    def score_many(self, subsets):
        todo = [s for s in dict.fromkeys(subsets) if s not in self.cache]
        if self.n_jobs > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                reports = list(pool.map(self.report, todo))
        else:
            reports = [self.report(s) for s in todo]
        for s, r in zip(todo, reports):
            self.cache[s] = r
        return [self.cache[s].mean_accuracy for s in subsets]


def _repair(genes, n_bands, rng, pool=()):
    """Replace duplicate genes, preferring unused genes from ``pool``."""
    seen, out = set(), []
    spare = [g for g in pool if g not in genes]
    for g in genes:
        if g in seen:
            while spare and spare[0] in seen:
                spare.pop(0)
            if spare:
                g = spare.pop(0)
            else:
                g = int(rng.integers(n_bands))
                while g in seen:
                    g = int(rng.integers(n_bands))
        seen.add(g)
        out.append(g)
    return out


def _tournament(fitness, size, rng):
    picks = rng.choice(len(fitness), size=min(size, len(fitness)), replace=False)
    return min(picks.tolist(), key=lambda i: (-fitness[i], i))


def ga_select_bands(features, labels=None, ga=GaConfig(), forest=ForestConfig(), cv_k=5,
                    n_jobs=1):
    """Genetic search for the ``ga.subset_size`` bands maximising RF accuracy.

    Fitness is mean ``cv_k``-fold accuracy on a fold partition shared by all
    chromosomes. Returns the best chromosome and the per-generation best
    fitness (``generations + 1`` entries).
    """
    X, fm_labels = _matrix(features)
    labels = np.asarray(fm_labels if labels is None else labels)
    n_bands = X.shape[1]
    if ga.subset_size > n_bands:
        raise ConfigError(f"subset_size {ga.subset_size} exceeds {n_bands} bands")
    _, counts = np.unique(labels, return_counts=True)
    if counts.min() != counts.max():
        warnings.warn("GA band selection on unbalanced labels", stacklevel=2)

    rng = derive_rng(ga.seed, "ga")
    scorer = _SubsetScorer(X, labels, forest, cv_k, n_jobs)
    mutation = ga.effective_mutation_rate

    population = [
        tuple(sorted(rng.choice(n_bands, size=ga.subset_size, replace=False).tolist()))
        for _ in range(ga.population_size)
    ]
    fitness = scorer.score_many(population)
    trace = [max(fitness)]

    for _ in range(ga.generations):
        ranked = sorted(range(len(population)), key=lambda i: (-fitness[i], population[i]))
        children = [population[i] for i in ranked[: ga.elitism]]
        while len(children) < ga.population_size:
            a = population[_tournament(fitness, ga.tournament_size, rng)]
            b = population[_tournament(fitness, ga.tournament_size, rng)]
            if rng.random() < ga.crossover_rate:
                # keep shared genes, pair the rest at random, then swap position-wise
                shared = [g for g in a if g in b]
                ua = rng.permutation([g for g in a if g not in shared]).tolist()
                ub = rng.permutation([g for g in b if g not in shared]).tolist()
                take_b = rng.random(ga.subset_size) < 0.5
                genes = shared + [gb if t else ga_ for ga_, gb, t in zip(ua, ub, take_b[len(shared):])]
                genes = _repair(genes, n_bands, rng, pool=list(a) + list(b))
            else:
                genes = list(a)
            for j in range(ga.subset_size):
                if rng.random() < mutation:
                    g = int(rng.integers(n_bands))
                    while g in genes:
                        g = int(rng.integers(n_bands))
                    genes[j] = g
            children.append(tuple(sorted(genes)))
        population = children
        fitness = scorer.score_many(population)
        trace.append(max(fitness))

    best = min(scorer.cache, key=lambda s: (-scorer.cache[s].mean_accuracy, s))
    return GaResult(best, scorer.cache[best].mean_accuracy, trace, len(scorer.cache),
                    {s: r.mean_accuracy for s, r in scorer.cache.items()})


@dataclass(frozen=True)
class CombinationResult:
    band_subset: Tuple[int, ...]
    mean_accuracy: float
    std_dev: float

    def __post_init__(self):
        if not self.band_subset:
            raise ConfigError("band subset must be non-empty")

    @property
    def size(self):
        return len(self.band_subset)


@dataclass
class ExhaustiveResult:
    results: List[CombinationResult]
    per_size: List[dict]
    best: CombinationResult

    def by_size(self, size):
        return [r for r in self.results if r.size == size]


def exhaustive_band_search(features, labels=None, forest=ForestConfig(), cv_k=5,
                           allow_any_band_count=False, n_jobs=1):
    """Score every non-empty band subset of a 10-band matrix on shared folds."""
    X, fm_labels = _matrix(features)
    labels = np.asarray(fm_labels if labels is None else labels)
    n_bands = X.shape[1]
    if n_bands != 10 and not allow_any_band_count:
        raise ConfigError(
            f"exhaustive search is only supported for the 10-band multispectral profile (got {n_bands})"
        )
    if not 1 <= n_bands <= 20:
        raise ConfigError("exhaustive search is capped at 20 bands (2^20 subsets)")
    subsets = [
        c for size in range(1, n_bands + 1) for c in itertools.combinations(range(n_bands), size)
    ]
    scorer = _SubsetScorer(X, labels, forest, cv_k, n_jobs)
    scorer.score_many(subsets)
    results = [
        CombinationResult(s, scorer.cache[s].mean_accuracy, scorer.cache[s].std_dev)
        for s in subsets
    ]
    per_size = []
    for size in range(1, n_bands + 1):
        accs = np.array([r.mean_accuracy for r in results if r.size == size])
        per_size.append({
            "size": size,
            "n_subsets": int(accs.size),
            "mean_accuracy": float(accs.mean()),
            "min_accuracy": float(accs.min()),
            "max_accuracy": float(accs.max()),
        })
    best = min(results, key=lambda r: (-r.mean_accuracy, r.size, r.band_subset))
    return ExhaustiveResult(results, per_size, best)


def _fmt_center(c):
    c = float(c)
    return str(int(c)) if c.is_integer() else repr(c)


def combination_rows_csv(results, centers):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subset", "size", "mean_accuracy", "std_dev"])
    for r in results:
        w.writerow([
            ";".join(_fmt_center(centers[i]) for i in r.band_subset),
            r.size, repr(r.mean_accuracy), repr(r.std_dev),
        ])
    return buf.getvalue()


def per_size_csv(per_size):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["size", "n_subsets", "mean_accuracy", "min_accuracy", "max_accuracy"]
    w.writerow(cols)
    for row in per_size:
        w.writerow([row[c] if isinstance(row[c], int) else repr(row[c]) for c in cols])
    return buf.getvalue()


def write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
