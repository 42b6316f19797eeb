"""Time forest training and prediction on each available tree backend.

    python benchmarks/bench_forest.py [--rows 486] [--cols 214] [--trees 100] [--repeats 3]

Both backends share one RNG stream, so the script also checks that they
grow identical forests before reporting the speedup.
"""
import argparse
import time

import numpy as np

from wiltscan.forest import ForestConfig, available_backends, predict, train_random_forest, use_backend


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=486)
    ap.add_argument("--cols", type=int, default=214)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    y = rng.integers(0, 2, args.rows)
    X = rng.normal(size=(args.rows, args.cols))
    X[:, :3] += y[:, None]
    cfg = ForestConfig(n_estimators=args.trees, seed=args.seed)

    results = {}
    for name in available_backends():
        with use_backend(name):
            fit_s, model = best_of(lambda: train_random_forest(X, y, cfg), args.repeats)
            pred_s, pred = best_of(lambda: predict(model, X), args.repeats)
        results[name] = (fit_s, pred_s, pred)
        print(f"{name:<8} fit {fit_s:8.3f} s   predict {pred_s:8.4f} s")

    if {"cython", "python"} <= results.keys():
        same = np.array_equal(results["cython"][2], results["python"][2])
        print(f"predictions identical: {same}")
        print(f"fit speedup {results['python'][0] / results['cython'][0]:.1f}x, "
              f"predict speedup {results['python'][1] / results['cython'][1]:.1f}x")
    else:
        print("compiled backend unavailable; only the pure-Python kernel was timed")


if __name__ == "__main__":
    main()
