import warnings

import numpy as np
import pytest

from wiltscan.bandselect import (
    N_AVERAGED,
    GaConfig,
    _repair,
    average_bands,
    averaged_band_centers,
    averaged_band_ranges,
    combination_rows_csv,
    exhaustive_band_search,
    ga_select_bands,
    per_size_csv,
)
from wiltscan.errors import ConfigError, ShapeError
from wiltscan.forest import ForestConfig
from wiltscan.raster import hyperspectral_profile
from wiltscan.segmentation import Spectrum

FAST = ForestConfig(n_estimators=15)


def test_average_constant_spectrum():
    out = average_bands(np.full(2151, 0.37))
    assert out.values.shape == (214,)
    assert np.all(out.values == 0.37)


def test_average_index_ramp():
    # band k holds value k; output j averages bands 1+10j .. 10+10j
    out = average_bands(np.arange(2151, dtype=float))
    assert out.values[0] == 5.5 and out.values[1] == 15.5 and out.values[-1] == 2135.5
    assert np.array_equal(out.values, 10 * np.arange(214) + 5.5)


def test_average_ranges_and_centers():
    r = averaged_band_ranges()
    assert len(r) == N_AVERAGED == 214
    assert r[0] == (351, 360) and r[-1] == (2481, 2490)
    assert averaged_band_centers()[0] == 355.5
    out = average_bands(Spectrum(hyperspectral_profile(), np.zeros(2151)), append_rgb=True)
    assert out.values.shape == (217,) and out.source_ranges[-1] == (650, 650)


def test_average_batch_and_errors():
    assert average_bands(np.ones((4, 2151))).values.shape == (4, 214)
    with pytest.raises(ShapeError):
        average_bands(np.ones(2150))


def test_ga_config_validation():
    assert GaConfig().subset_size == 5 and GaConfig().population_size == 50
    assert GaConfig().effective_mutation_rate == 0.2
    for bad in (dict(subset_size=0), dict(subset_size=215), dict(population_size=1)):
        with pytest.raises(ConfigError):
            GaConfig(**bad)


def test_repair_restores_distinct_genes():
    rng = np.random.default_rng(0)
    assert _repair([1, 1, 2], 10, rng, pool=[1, 2, 7]) == [1, 7, 2]
    out = _repair([3, 3, 3, 3], 5, rng)
    assert len(set(out)) == 4 and all(0 <= g < 5 for g in out)


def _planted(n=60, d=20, bands=(3, 11), sig=2.5, seed=0):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n)
    X = rng.normal(size=(2 * n, d))
    for b in bands:
        X[:, b] += sig * y
    return X, y


def test_ga_trace_non_decreasing_and_deterministic():
    X, y = _planted()
    ga = GaConfig(population_size=12, generations=6, subset_size=3, seed=2)
    a = ga_select_bands(X, y, ga, FAST)
    b = ga_select_bands(X, y, ga, FAST)
    assert len(a.trace) == 7
    assert all(x <= y_ for x, y_ in zip(a.trace, a.trace[1:]))
    assert (a.selected, a.trace) == (b.selected, b.trace)
    assert len(set(a.selected)) == 3 and a.fitness == a.trace[-1]
    assert a.evaluations == len(a.cache)


def test_ga_zero_generations_returns_best_initial():
    X, y = _planted()
    r = ga_select_bands(X, y, GaConfig(population_size=8, generations=0, subset_size=2), FAST)
    assert len(r.trace) == 1 and r.fitness == max(r.cache.values())


def test_ga_finds_planted_bands_on_small_problem():
    X, y = _planted(d=20)
    r = ga_select_bands(X, y, GaConfig(population_size=16, generations=8, subset_size=3, seed=1), FAST)
    assert {3, 11} <= set(r.selected)


def test_ga_thread_invariance():
    X, y = _planted()
    ga = GaConfig(population_size=8, generations=2, subset_size=2)
    assert ga_select_bands(X, y, ga, FAST).cache == ga_select_bands(X, y, ga, FAST, n_jobs=3).cache


def test_ga_errors_and_warning():
    X, y = _planted(d=4, bands=(1, 2))
    with pytest.raises(ConfigError):
        ga_select_bands(X, y, GaConfig(subset_size=5))
    with pytest.warns(UserWarning):
        ga_select_bands(X[:-5], y[:-5], GaConfig(population_size=2, generations=0, subset_size=1), FAST)


def _xor(n=60, d=5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(2 * n, d))
    y = ((X[:, 1] > 0) ^ (X[:, d - 1] > 0)).astype(int)
    return X, y


def test_exhaustive_counts_and_xor_pair():
    X, y = _xor()
    r = exhaustive_band_search(X, y, FAST, allow_any_band_count=True)
    assert len(r.results) == 31
    assert [p["n_subsets"] for p in r.per_size] == [5, 10, 10, 5, 1]
    assert {1, 4} <= set(r.best.band_subset)
    # each planted band alone is near chance, the pair is not
    single = {c.band_subset: c.mean_accuracy for c in r.by_size(1)}
    pair = next(c for c in r.results if c.band_subset == (1, 4))
    assert max(single.values()) < 0.7 < pair.mean_accuracy


def test_exhaustive_requires_ten_bands():
    X, y = _xor()
    with pytest.raises(ConfigError):
        exhaustive_band_search(X, y, FAST)
    with pytest.raises(ConfigError):
        exhaustive_band_search(np.zeros((4, 21)), [0, 0, 1, 1], FAST, allow_any_band_count=True)


def test_exhaustive_csv_output():
    X, y = _xor(d=3)
    r = exhaustive_band_search(X, y, FAST, allow_any_band_count=True)
    lines = combination_rows_csv(r.results, [475.0, 560.0, 717.5]).splitlines()
    assert lines[0] == "subset,size,mean_accuracy,std_dev"
    assert lines[1].startswith("475,1,") and lines[-1].startswith("475;560;717.5,3,")
    assert per_size_csv(r.per_size).splitlines()[0] == "size,n_subsets,mean_accuracy,min_accuracy,max_accuracy"


def test_exhaustive_ten_bands_evaluates_1023_subsets():
    X, y = _xor(n=20, d=10)
    r = exhaustive_band_search(X, y, ForestConfig(n_estimators=3))
    assert len(r.results) == 1023 and len({c.band_subset for c in r.results}) == 1023
