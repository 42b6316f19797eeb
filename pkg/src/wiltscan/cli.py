"""``wiltscan`` command line: synth, extract, classify, select-bands, fuse, early."""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import svg
from .bandselect import (
    GaConfig,
    combination_rows_csv,
    exhaustive_band_search,
    ga_select_bands,
    per_size_csv,
    write_text,
)
from .errors import ConfigError, DataError, IOFailure, ParseError, WiltscanError
from .extract import ExtractOptions, extract_features
from .features import read_features_csv, write_features_csv
from .forest import ForestConfig
from .fusion import GROUP_NAMES, assemble_feature_groups, backward_eliminate, groups_from_table
from .ml import LabelScheme, balance_classes, cross_validate, regroup_labels
from .raster import load_dataset, load_plot_manifest, load_sensor_profile
from .stats import (
    accuracy_table_csv,
    bandwise_ttest_report,
    early_detection_report,
    five_number_summary,
    multispectral_feature_sets,
    relabel_early,
    ttest_report_csv,
)
from .synth import generate_synthetic_dataset, load_synth_config

log = logging.getLogger("wiltscan")


def _out_dir(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create output directory {out}: {exc}") from exc
    return out


def _forest(args):
    mf = args.max_features
    if mf not in ("sqrt", "log2", None):
        mf = float(mf) if "." in mf else int(mf)
    return ForestConfig(n_estimators=args.trees, max_features=mf, max_depth=args.max_depth,
                        seed=args.seed, n_jobs=args.jobs)


def _labelled_rows(table, time_point, scheme, seed, columns):
    """Rows at ``time_point`` with clean extraction, regrouped and class-balanced."""
    sub = table.ok_rows().at_time_point(time_point)
    if len(sub) == 0:
        raise DataError(f"no usable rows at {time_point}")
    labels = regroup_labels(sub.wilt_scores, scheme)
    return balance_classes(sub.matrix(columns), labels, seed=seed)


def _feature_sets(table, specs):
    """``NAME=group[,group...]`` specs, defaulting to one set per group plus all of them."""
    groups = [g for g in table.groups()]
    if not specs:
        sets = {g: table.group_columns(g) for g in groups}
        sets["all"] = list(table.names)
        return sets
    sets = {}
    for spec in specs:
        name, _, rhs = spec.partition("=")
        if not rhs:
            raise ConfigError(f"feature set {spec!r} must look like NAME=group1,group2")
        cols = []
        for g in rhs.split(","):
            if g not in groups:
                raise ConfigError(f"feature set {name!r}: no columns in group {g!r}")
            cols.extend(table.group_columns(g))
        sets[name] = cols
    return sets


def cmd_synth(args):
    cfg = load_synth_config(args.config)
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
    gt = generate_synthetic_dataset(cfg, _out_dir(args.out))
    print(gt.manifest_path)


def _veg_ratios(specs):
    out = {}
    for spec in specs or []:
        tp, _, val = spec.partition("=")
        try:
            out[tp] = float(val)
        except ValueError:
            raise ConfigError(f"--veg-ratio expects TP=fraction, got {spec!r}") from None
    return out


def cmd_extract(args):
    manifest = load_plot_manifest(args.manifest)
    if args.profile:
        paths = [Path(p) for p in args.profile]
    else:
        paths = sorted((Path(args.manifest).parent / "profiles").glob("*.json"))
    profiles = {p.name: p for p in map(load_sensor_profile, paths)}
    dataset = load_dataset(manifest, profiles)
    options = ExtractOptions(veg_ratio=_veg_ratios(args.veg_ratio), kmeans_seed=args.seed,
                             veg_ratio_from_mask=args.veg_ratio_from_mask)
    table = extract_features(dataset, options)
    out = _out_dir(args.out)
    write_features_csv(table, out / "features.csv")
    failed = [(p, t, s) for p, t, s in zip(table.plot_ids, table.time_points, table.status) if s]
    for p, t, s in failed:
        print(f"{p} {t}: {s}", file=sys.stderr)
    if failed:
        raise DataError(f"{len(failed)} of {len(table)} plot rows failed extraction")


def cmd_classify(args):
    table = read_features_csv(args.features)
    forest = _forest(args)
    out = _out_dir(args.out)
    reports, lines = {}, ["feature_set,scheme,time_point,n,mean_accuracy,std_dev"]
    for name, cols in _feature_sets(table, args.feature_set).items():
        fm = _labelled_rows(table, args.time_point, args.scheme, args.seed, cols)
        rep = cross_validate(fm, k=args.k, config=forest, stratified=not args.random_folds,
                             pca_variance=args.pca, n_jobs=args.jobs)
        reports[name] = rep.to_dict()
        lines.append(f"{name},{args.scheme},{args.time_point},{fm.n_rows},"
                     f"{rep.mean_accuracy!r},{rep.std_dev!r}")
    write_text(out / "eval_report.json", json.dumps(reports, indent=2, sort_keys=True) + "\n")
    write_text(out / "classification.csv", "\n".join(lines) + "\n")


def cmd_select_bands(args):
    table = read_features_csv(args.features)
    forest = _forest(args)
    out = _out_dir(args.out)
    group = "hyperspectral" if args.mode == "ga" else "multispectral"
    cols = table.group_columns(group)
    if not cols:
        raise DataError(f"features have no {group} columns")
    fm = _labelled_rows(table, args.time_point, args.scheme, args.seed, cols)
    centers = [float(c.split(":", 1)[1]) for c in cols]
    if args.mode == "exhaustive":
        res = exhaustive_band_search(fm, forest=forest, cv_k=args.k, n_jobs=args.jobs)
        write_text(out / "band_search.csv", combination_rows_csv(res.results, centers))
        write_text(out / "band_search_summary.csv", per_size_csv(res.per_size))
        sizes = [r["size"] for r in res.per_size]
        chart = svg.line_chart(
            {k: (sizes, [r[f"{k}_accuracy"] for r in res.per_size]) for k in ("mean", "min", "max")},
            "Accuracy by band-subset size", "bands in subset", "accuracy",
        )
        write_text(out / "band_search.svg", chart)
        return
    ga = GaConfig(population_size=args.population, generations=args.generations,
                  subset_size=args.subset_size, seed=args.seed)
    res = ga_select_bands(fm, ga=ga, forest=forest, cv_k=args.k, n_jobs=args.jobs)
    ranked = sorted(res.cache.items(), key=lambda kv: (-kv[1], kv[0]))
    lines = ["subset,mean_accuracy"] + [
        f"{';'.join(repr(centers[i]) for i in s)},{acc!r}" for s, acc in ranked
    ]
    write_text(out / "band_search.csv", "\n".join(lines) + "\n")
    trace = ["generation,best_fitness"] + [f"{g},{f!r}" for g, f in enumerate(res.trace)]
    write_text(out / "ga_trace.csv", "\n".join(trace) + "\n")
    write_text(out / "ga_trace.svg", svg.line_chart(
        {"best fitness": (list(range(len(res.trace))), res.trace)},
        "GA best fitness per generation", "generation", "accuracy"))
    summary = {"selected_bands": [int(i) for i in res.selected],
               "selected_centers_nm": [centers[i] for i in res.selected],
               "fitness": res.fitness, "evaluations": res.evaluations}
    write_text(out / "ga_result.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")


def cmd_fuse(args):
    table = read_features_csv(args.features)
    forest = _forest(args)
    out = _out_dir(args.out)
    names = args.groups.split(",") if args.groups else [
        g for g in GROUP_NAMES if g != "growth_stage" and table.group_columns(g)]
    if args.growth_stage and "growth_stage" not in names:
        names.append("growth_stage")
    sub = table.at_time_point(args.time_point)
    if len(sub) == 0:
        raise DataError(f"no rows at {args.time_point}")
    groups = groups_from_table(sub, names)
    fm = assemble_feature_groups(sub, groups)
    labels = regroup_labels(sub.wilt_scores, args.scheme)
    fm = balance_classes(fm, labels, seed=args.seed)
    trace = backward_eliminate(fm, groups, forest=forest, cv_k=args.k, strict=not args.non_strict)
    write_text(out / "elimination.json", trace.to_json() + "\n")
    write_text(out / "elimination.txt", trace.table() + "\n")
    print(trace.table())


def cmd_early(args):
    table = read_features_csv(args.features)
    forest = _forest(args)
    out = _out_dir(args.out)
    ed = relabel_early(table.ok_rows(), seed=args.seed)
    band_cols = table.group_columns("multispectral") + table.group_columns("vi_multispectral")
    for tp in ed.time_points:
        rows = bandwise_ttest_report(ed, tp, columns=band_cols, equal_var=args.pooled)
        write_text(out / f"ttest_{tp}.csv", ttest_report_csv(rows))
        bands = [r for r in rows if r.band_center_nm is not None]
        write_text(out / f"ttest_{tp}.svg", svg.bar_chart(
            [f"{r.band_center_nm:g}" for r in bands], [r.result.t_statistic for r in bands],
            [r.result.stars for r in bands], f"Susceptible vs tolerant, {tp}",
            "band center (nm)", "Welch t"))

    lines = ["time_point,feature,class,min,q1,median,q3,max"]
    vis = table.group_columns("vi_multispectral")
    for tp in ed.time_points:
        m = ed.matrices[tp]
        for col in vis:
            v = m.values[:, m.names.index(col)]
            for cls, cname in ((0, "tolerant"), (1, "susceptible")):
                s = five_number_summary(v[m.labels == cls])
                lines.append(f"{tp},{col.split(':', 1)[1]},{cname}," + ",".join(repr(s[k]) for k in
                             ("min", "q1", "median", "q3", "max")))
    write_text(out / "vi_boxplot.csv", "\n".join(lines) + "\n")

    sets = multispectral_feature_sets(table.names)
    if not sets:
        raise DataError("features have no multispectral columns")
    acc = early_detection_report(ed, sets, forest, args.k)
    write_text(out / "early_accuracy.csv", accuracy_table_csv(acc))
    tps = ed.time_points
    series = {}
    for name in sets:
        ys = [r.mean_accuracy for r in acc if r.feature_set == name]
        series[name] = (list(range(len(tps))), ys)
    write_text(out / "early_accuracy.svg", svg.line_chart(
        series, "Early detection accuracy", "time point (" + ", ".join(tps) + ")", "accuracy",
        (0.0, 1.0)))
    counts = {c: sum(1 for v in ed.labels.values() if v == c) for c in (0, 1)}
    print(f"tolerant={counts[0]} susceptible={counts[1]}")


def _add_forest_flags(p, seed_required=True):
    p.add_argument("--seed", type=int, required=seed_required)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-features", default="sqrt")
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--k", type=int, default=5, help="cross-validation folds")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=".")


def build_parser():
    parser = argparse.ArgumentParser(prog="wiltscan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="segment plots and write features.csv")
    p.add_argument("manifest")
    p.add_argument("--profile", action="append")
    p.add_argument("--veg-ratio", action="append", metavar="TP=FRACTION",
                   help="expected vegetation fraction for thermal k-means, per time point")
    p.add_argument("--veg-ratio-from-mask", action="store_true",
                   help="use the optical canopy-mask fraction when --veg-ratio is absent")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_extract)

    scheme = dict(choices=[s.value for s in LabelScheme], default="two")

    p = sub.add_parser("classify", help="cross-validated RF accuracy per feature set")
    p.add_argument("features")
    p.add_argument("--scheme", **scheme)
    p.add_argument("--time-point", default="T3")
    p.add_argument("--feature-set", action="append", metavar="NAME=GROUP[,GROUP]")
    p.add_argument("--pca", type=float, default=None, metavar="VARIANCE")
    p.add_argument("--random-folds", action="store_true")
    _add_forest_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("select-bands", help="GA (hyperspectral) or exhaustive (multispectral) search")
    p.add_argument("features")
    p.add_argument("--mode", choices=["ga", "exhaustive"], required=True)
    p.add_argument("--scheme", **scheme)
    p.add_argument("--time-point", default="T3")
    p.add_argument("--subset-size", type=int, default=5)
    p.add_argument("--population", type=int, default=50)
    p.add_argument("--generations", type=int, default=30)
    _add_forest_flags(p)
    p.set_defaults(func=cmd_select_bands)

    p = sub.add_parser("fuse", help="backward elimination over sensor groups")
    p.add_argument("features")
    p.add_argument("--groups", help="comma-separated group names (default: all present)")
    p.add_argument("--growth-stage", action="store_true")
    p.add_argument("--non-strict", action="store_true")
    p.add_argument("--scheme", **scheme)
    p.add_argument("--time-point", default="T3")
    _add_forest_flags(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("early", help="early-detection t-tests and accuracies")
    p.add_argument("features")
    p.add_argument("--pooled", action="store_true", help="pooled-variance t-test")
    _add_forest_flags(p)
    p.set_defaults(func=cmd_early)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except WiltscanError as exc:
        print(f"wiltscan {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except json.JSONDecodeError as exc:
        print(f"wiltscan {args.command}: {ParseError(exc)}", file=sys.stderr)
        return ParseError.exit_code
    except OSError as exc:
        print(f"wiltscan {args.command}: {exc}", file=sys.stderr)
        return IOFailure.exit_code
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"wiltscan {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
