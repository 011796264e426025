"""Command-line front end.

Subcommands: ``fit``, ``eval``, ``simulate {shift|oversample|sweep}`` and
``analyze {distances|correlate|gridsearch}``. Reports go to stdout,
diagnostics to stderr. Exit codes: 0 success, 2 usage/config error, 3
data/model error. Every command is byte-deterministic given its flags and
seed.

Dataset arguments take the form ``data.csv`` (manifest expected next to it
with a ``.json`` suffix) or ``data.csv::manifest.json``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analyze import (
    GridSpec,
    correlate_difficulty,
    distance_table,
    grid_search,
)
from .calibrate import (
    SCHEME_MULTI,
    SCHEME_ONE,
    ThresholdModel,
    fit_threshold_multi,
    fit_threshold_one,
)
from .dataset import LogitDataset, load_dataset, split_dataset
from .errors import (
    BetaOutOfRange,
    DimensionMismatch,
    NonPositiveTemperature,
    OodcalError,
    UsageError,
)
from .evaluate import (
    build_report,
    dump_reports,
    missed_detection_rate,
    per_class_tpr,
    write_ood_rates_csv,
    write_tpr_csv,
)
from .scores import (
    KNN_AGGREGATIONS,
    KNN_METRICS,
    DetectorModel,
    fit_knn,
    fit_mahalanobis,
    score_dataset,
)
from .simulate import (
    perturbation_sweep,
    simulate_label_shift,
    simulate_oversampling,
    summarize_oversampling,
    summarize_shift,
    summarize_sweep,
    write_oversample_csv,
    write_shift_csv,
    write_summary_json,
    write_sweep_csv,
)

DETECTOR_CHOICES = ("max-logit", "max-softmax", "energy", "mahalanobis", "knn")


# --- argument plumbing -------------------------------------------------------


def _dataset_arg(spec: str) -> LogitDataset:
    if "::" in spec:
        csv_path, manifest = spec.split("::", 1)
    else:
        csv_path = spec
        p = Path(spec)
        manifest = str(p.with_suffix(".json")) if p.suffix else spec + ".json"
    for path in (csv_path, manifest):
        if not Path(path).exists():
            raise UsageError(f"file not found: {path}")
    return load_dataset(csv_path, manifest)


def _check_beta_flag(beta: float) -> None:
    if not (0.0 < beta < 1.0):
        raise BetaOutOfRange(f"beta must be in (0, 1), got {beta}")


def _check_fraction(fraction: float) -> None:
    if not (0.0 < fraction < 1.0):
        raise UsageError(f"valid fraction must be in (0, 1), got {fraction}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, default=0.95)
    p.add_argument("--scheme", choices=(SCHEME_ONE, SCHEME_MULTI), default=SCHEME_ONE)
    p.add_argument("--config", help="JSON file of flag defaults (explicit flags win)")


def _add_detector_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--detector", choices=DETECTOR_CHOICES, default="max-logit")
    p.add_argument("--detector-model", help="fitted detector JSON (overrides --detector)")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--metric", choices=KNN_METRICS, default="euclidean")
    p.add_argument("--aggregation", choices=KNN_AGGREGATIONS, default="largest")
    p.add_argument("--minkowski-p", type=float, default=2.0)
    p.add_argument("--eps-scale", type=float, default=1e-6)


def _build_detector(args, fit_data: LogitDataset | None = None) -> DetectorModel:
    if getattr(args, "detector_model", None):
        path = Path(args.detector_model)
        if not path.exists():
            raise UsageError(f"file not found: {path}")
        return DetectorModel.load(path)
    kind = args.detector.replace("-", "_")
    if kind == "max_logit":
        return DetectorModel(kind="max_logit")
    if kind in ("max_softmax", "energy"):
        return DetectorModel(kind=kind, temperature=args.temperature)
    if fit_data is None:
        raise UsageError(
            f"{args.detector} must be fitted first; pass --detector-model or run fit"
        )
    if kind == "mahalanobis":
        return fit_mahalanobis(fit_data, eps_scale=args.eps_scale)
    return fit_knn(
        fit_data,
        k=args.k,
        metric=args.metric,
        aggregation=args.aggregation,
        minkowski_p=args.minkowski_p,
    )


def _describe(detector: DetectorModel) -> str:
    if detector.kind in ("energy", "max_softmax") and detector.temperature != 1.0:
        return f"{detector.kind}(T={detector.temperature})"
    if detector.kind == "knn":
        return (
            f"knn(k={detector.k},metric={detector.metric},"
            f"aggregation={detector.aggregation})"
        )
    return detector.kind


def _check_model_schema(model: ThresholdModel, ds: LogitDataset) -> None:
    if model.scheme == SCHEME_MULTI and model.num_classes != ds.num_classes:
        raise DimensionMismatch(
            f"threshold model has {model.num_classes} classes, "
            f"dataset {ds.name!r} declares {ds.num_classes}"
        )


# --- commands ----------------------------------------------------------------


def cmd_fit(args) -> int:
    _check_beta_flag(args.beta)
    _check_fraction(args.valid_fraction)
    ds = _dataset_arg(args.id)
    train, valid = split_dataset(ds, args.valid_fraction, args.seed)
    detector = _build_detector(args, fit_data=train)
    sv = score_dataset(detector, valid)
    if args.scheme == SCHEME_MULTI:
        model = fit_threshold_multi(sv, args.beta, ds.num_classes)
    else:
        model = fit_threshold_one(sv, args.beta)
    detector.save(args.detector_out)
    model.save(args.threshold_out)
    for c, n in enumerate(model.fit_counts):
        print(f"class {c}: {int(n)} validation samples")
    return 0


def cmd_eval(args) -> int:
    detector = DetectorModel.load(args.detector_model)
    models = [ThresholdModel.load(p) for p in args.threshold_model]
    id_ds = _dataset_arg(args.id_test)
    for model in models:
        _check_model_schema(model, id_ds)
    sv = score_dataset(detector, id_ds)

    ood_data = [(ds.name, score_dataset(detector, ds)) for ds in map(_dataset_arg, args.ood)]
    reports = []
    for model in models:
        tpr = per_class_tpr(sv, model, num_classes=id_ds.num_classes)
        rates = [(name, missed_detection_rate(s, model)) for name, s in ood_data]
        reports.append(
            build_report(_describe(detector), model.scheme, model.beta, tpr, rates)
        )
    print(dump_reports(reports))

    if args.csv_dir:
        out = Path(args.csv_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, (model, report) in enumerate(zip(models, reports)):
            tag = model.scheme if sum(m.scheme == model.scheme for m in models) == 1 else f"{model.scheme}{i}"
            tpr = per_class_tpr(sv, model, num_classes=id_ds.num_classes)
            write_tpr_csv(out / f"tpr_{tag}.csv", tpr)
            write_ood_rates_csv(out / f"ood_rates_{tag}.csv", list(report.per_ood_set))
    return 0


def cmd_simulate_shift(args) -> int:
    _check_beta_flag(args.beta)
    _check_fraction(args.valid_fraction)
    ds = _dataset_arg(args.id)
    detector = _build_detector(args)
    records = simulate_label_shift(
        ds,
        detector,
        scheme=args.scheme,
        beta=args.beta,
        n_trials=args.trials,
        master_seed=args.seed,
        valid_fraction=args.valid_fraction,
        equal_marginals=args.equal_marginals,
        fit_mode=args.fit_mode,
        valid_resample_factor=args.valid_resample_factor,
    )
    write_shift_csv(records, args.out_csv)
    summary = {
        "protocol": {
            "scheme": args.scheme,
            "beta": args.beta,
            "seed": args.seed,
            "valid_fraction": args.valid_fraction,
            "fit_mode": args.fit_mode,
            "valid_resample_factor": args.valid_resample_factor,
            "test_resample": "with-replacement, original size",
        },
        **summarize_shift(records),
    }
    write_summary_json(summary, args.out_json)
    print(f"wrote {len(records)} shift trials", file=sys.stderr)
    return 0


def cmd_simulate_oversample(args) -> int:
    ds = _dataset_arg(args.id_test)
    detector = _build_detector(args)
    model = ThresholdModel.load(args.threshold_model)
    _check_model_schema(model, ds)
    lo, hi = args.gamma
    records = simulate_oversampling(
        ds,
        model,
        detector,
        n_trials=args.trials,
        gamma_range=(lo, hi),
        master_seed=args.seed,
    )
    write_oversample_csv(records, args.out_csv)
    write_summary_json(summarize_oversampling(records, ds.num_classes), args.out_json)
    print(f"wrote {len(records)} oversampling trials", file=sys.stderr)
    return 0


def cmd_simulate_sweep(args) -> int:
    if not (0.0 <= args.delta <= 1.0):
        raise UsageError(f"delta must be in [0, 1], got {args.delta}")
    detector = _build_detector(args)
    one_model = ThresholdModel.load(args.threshold_one)
    multi_model = ThresholdModel.load(args.threshold_multi)
    ood_scores = {}
    for spec in args.ood:
        ds = _dataset_arg(spec)
        ood_scores[ds.name] = score_dataset(detector, ds)
    records, multi_rates = perturbation_sweep(
        one_model, multi_model, ood_scores, delta=args.delta, n_points=args.points
    )
    write_sweep_csv(records, args.out_csv)
    write_summary_json(summarize_sweep(records, multi_rates), args.out_json)
    print(f"wrote {len(records)} sweep points", file=sys.stderr)
    return 0


def cmd_analyze_distances(args) -> int:
    id_ds = _dataset_arg(args.id_test)
    max_logit = DetectorModel(kind="max_logit")
    id_scores = score_dataset(max_logit, id_ds).scores
    named = []
    for spec in args.ood:
        ds = _dataset_arg(spec)
        named.append((ds.name, score_dataset(max_logit, ds).scores))
    pairs = distance_table(id_scores, named)
    with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write("ood_set,wasserstein,energy\n")
        for p in pairs:
            fh.write(f"{p.ood_set},{repr(p.wasserstein)},{repr(p.energy)}\n")
    print(f"wrote {len(pairs)} distance rows", file=sys.stderr)
    return 0


def _read_csv_rows(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        rows = []
        for line in fh:
            line = line.rstrip("\n")
            if line:
                rows.append(dict(zip(header, line.split(","))))
    return rows


def cmd_analyze_correlate(args) -> int:
    from .analyze import DistancePair

    rate_rows = _read_csv_rows(args.rates_csv)
    dist_rows = _read_csv_rows(args.distances_csv)
    rates = [(r["ood_set"], float(r["missed_detection_rate"])) for r in rate_rows]
    distances = [
        DistancePair(
            ood_set=r["ood_set"],
            wasserstein=float(r["wasserstein"]),
            energy=float(r["energy"]),
        )
        for r in dist_rows
    ]
    result = correlate_difficulty(rates, distances)
    print(json.dumps(result, indent=2))
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write("detector,scheme,wasserstein_r,energy_r\n")
            fh.write(
                f"{args.detector},{args.scheme},"
                f"{repr(result['wasserstein_r'])},{repr(result['energy_r'])}\n"
            )
    return 0


def cmd_analyze_gridsearch(args) -> int:
    _check_beta_flag(args.beta)
    with open(args.grid, "r", encoding="utf-8") as fh:
        grid = GridSpec.from_json(json.load(fh))
    fit_data = _dataset_arg(args.fit)
    valid_id = _dataset_arg(args.valid_id)
    valid_ood = _dataset_arg(args.valid_ood)
    result = grid_search(grid, fit_data, valid_id, valid_ood, args.beta, args.scheme)

    param_keys = [k for k in GridSpec._KEYS[grid.family] if k in grid.candidates]
    columns = ["index", "family", *param_keys, "missed_detection_rate", "min_tpr"]
    with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in result.table:
            cells = []
            for col in columns:
                v = row.get(col, "")
                cells.append(repr(v) if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")
    print(json.dumps(result.best, indent=2))
    return 0


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodcal",
        description="OoD detection threshold calibration and robustness studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a detector and its TPR-beta thresholds")
    _add_common(p)
    _add_detector_flags(p)
    p.add_argument("--id", required=True, help="labeled ID dataset csv[::manifest]")
    p.add_argument("--valid-fraction", type=float, default=0.5)
    p.add_argument("--detector-out", required=True)
    p.add_argument("--threshold-out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate fitted models on ID and OoD data")
    _add_common(p)
    p.add_argument("--detector-model", required=True)
    p.add_argument(
        "--threshold-model",
        action="append",
        required=True,
        help="threshold model JSON; repeat for side-by-side reports",
    )
    p.add_argument("--id-test", required=True)
    p.add_argument("--ood", action="append", default=[])
    p.add_argument("--csv-dir")
    p.set_defaults(func=cmd_eval)

    sim = sub.add_parser("simulate", help="robustness simulations")
    sim_sub = sim.add_subparsers(dest="study", required=True)

    p = sim_sub.add_parser("shift", help="label-shift Monte Carlo")
    _add_common(p)
    _add_detector_flags(p)
    p.add_argument("--id", required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--valid-fraction", type=float, default=0.5)
    p.add_argument("--equal-marginals", action="store_true")
    p.add_argument("--fit-mode", choices=("weighted", "resample"), default="weighted")
    p.add_argument("--valid-resample-factor", type=int, default=1)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)
    p.set_defaults(func=cmd_simulate_shift)

    p = sim_sub.add_parser("oversample", help="class-oversampling TPR study")
    _add_common(p)
    _add_detector_flags(p)
    p.add_argument("--id-test", required=True)
    p.add_argument("--threshold-model", required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--gamma", type=float, nargs=2, default=[1.0, 10.0], metavar=("LO", "HI"))
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)
    p.set_defaults(func=cmd_simulate_oversample)

    p = sim_sub.add_parser("sweep", help="single-threshold perturbation sweep")
    _add_common(p)
    _add_detector_flags(p)
    p.add_argument("--threshold-one", required=True)
    p.add_argument("--threshold-multi", required=True)
    p.add_argument("--ood", action="append", required=True)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)
    p.set_defaults(func=cmd_simulate_sweep)

    ana = sub.add_parser("analyze", help="distances, correlation and grid search")
    ana_sub = ana.add_subparsers(dest="analysis", required=True)

    p = ana_sub.add_parser("distances", help="Wasserstein/energy distances to OoD sets")
    _add_common(p)
    p.add_argument("--id-test", required=True)
    p.add_argument("--ood", action="append", required=True)
    p.add_argument("--out-csv", required=True)
    p.set_defaults(func=cmd_analyze_distances)

    p = ana_sub.add_parser("correlate", help="correlate missed rates with distances")
    _add_common(p)
    p.add_argument("--detector", default="max-logit", help="label for the output row")
    p.add_argument("--rates-csv", required=True)
    p.add_argument("--distances-csv", required=True)
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_analyze_correlate)

    p = ana_sub.add_parser("gridsearch", help="exhaustive hyperparameter sweep")
    _add_common(p)
    p.add_argument("--grid", required=True, help="JSON grid spec")
    p.add_argument("--fit", required=True, help="detector fitting dataset")
    p.add_argument("--valid-id", required=True)
    p.add_argument("--valid-ood", required=True)
    p.add_argument("--out-csv", required=True)
    p.set_defaults(func=cmd_analyze_gridsearch)

    return parser


def _inject_config(argv: list[str]) -> list[str]:
    """Expand --config FILE into flags placed before the user's own flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config needs a file path")
    path = argv[i + 1]
    if not Path(path).exists():
        raise UsageError(f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    rest = argv[:i] + argv[i + 2 :]
    j = 0
    while j < len(rest) and not rest[j].startswith("-"):
        j += 1
    extra: list[str] = []
    for key, value in config.items():
        flag = "--" + str(key).replace("_", "-")
        if isinstance(value, bool):
            if value:
                extra.append(flag)
        elif isinstance(value, list):
            extra.append(flag)
            extra.extend(str(v) for v in value)
        else:
            extra.extend([flag, str(value)])
    return rest[:j] + extra + rest[j:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_inject_config(argv))
        return args.func(args)
    except (UsageError, BetaOutOfRange, NonPositiveTemperature) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return 2
    except OodcalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
