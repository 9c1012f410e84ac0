"""Command-line interface: train, predict, cross-validate, generate, benchmark.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 training
failure. Every run writes a key=value manifest sufficient to replay it.
Option precedence is defaults < config file (--config, flat key=value
lines) < explicit flags. All outputs are written atomically.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from ._util import derive_seed
from .data import DataError, Dataset, load_csv, load_feature_matrix, write_csv
from .datagen import generate
from .isle import IsleConfig
from .model import (
    FirthParams,
    LassoParams,
    ModelFormatError,
    PipelineConfig,
    PruneParams,
    TrainingError,
    config_digest,
    cross_validate,
    load_model,
    metric_rmse,
    predict,
    ruleset_digest,
    save_model,
    train,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAIN = 4

# name -> (parser, default); config-file keys use the same names
_PIPELINE_PARAMS = {
    "mode": (str, "hard"),
    "depth": (str, "4"),
    "trees": (int, 400),
    "row_fraction": (float, 0.30),
    "col_fraction": (float, 0.10),
    "memory": (float, 0.0),
    "min_leaf": (int, 5),
    "grid_size": (int, 100),
    "lambda_min_ratio": (float, 1e-3),
    "lasso_cv_folds": (int, 10),
    "firth_tol": (float, 1e-6),
    "firth_max_iter": (int, 50),
    "min_support": (float, 0.005),
    "max_support": (float, 0.995),
    "seed": (int, 0),
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read_config_file(path) -> dict[str, str]:
    if not os.path.exists(path):
        raise CliError(f"config file not found: {path}", EXIT_CONFIG)
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value", EXIT_CONFIG)
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _PIPELINE_PARAMS:
                raise CliError(f"{path}:{lineno}: unknown key {key!r}", EXIT_CONFIG)
            out[key] = value.strip()
    return out


def _resolve_params(args) -> dict:
    """Merge defaults, config file and explicit flags, then type-check."""
    resolved: dict = {}
    file_values = _read_config_file(args.config) if getattr(args, "config", None) else {}
    for name, (conv, default) in _PIPELINE_PARAMS.items():
        value = getattr(args, name, None)
        if value is None and name in file_values:
            try:
                value = conv(file_values[name])
            except ValueError:
                raise CliError(
                    f"config key {name}={file_values[name]!r} is not a valid {conv.__name__}",
                    EXIT_CONFIG,
                ) from None
        if value is None:
            value = default
        resolved[name] = value
    return resolved


def _parse_depths(text: str) -> list[int]:
    """'4' -> [4]; '2..5' -> [2, 3, 4, 5]."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
            if lo > hi:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(text)]
    except ValueError:
        raise CliError(f"bad depth specification {text!r} (use N or N..M)", EXIT_CONFIG) from None


def _build_config(params: dict, depth: int, mode: str) -> PipelineConfig:
    try:
        return PipelineConfig(
            isle=IsleConfig(
                num_trees=params["trees"],
                memory=params["memory"],
                row_fraction=params["row_fraction"],
                feature_fraction=params["col_fraction"],
                max_depth=depth,
                min_leaf=params["min_leaf"],
                seed=params["seed"],
            ),
            mode=mode,
            lasso=LassoParams(
                grid_size=params["grid_size"],
                lambda_min_ratio=params["lambda_min_ratio"],
                cv_folds=params["lasso_cv_folds"],
            ),
            firth=FirthParams(tol=params["firth_tol"], max_iter=params["firth_max_iter"]),
            prune=PruneParams(
                min_support=params["min_support"], max_support=params["max_support"]
            ),
        )
    except ValueError as exc:
        raise CliError(f"invalid configuration: {exc}", EXIT_CONFIG) from exc


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(path, entries: list[tuple[str, object]]) -> None:
    _atomic_write(path, "".join(f"{k}={v}\n" for k, v in entries))


def _manifest_header(command: str, args, params: dict | None) -> list[tuple[str, object]]:
    entries: list[tuple[str, object]] = [
        ("command", command),
        ("version", __version__),
        ("threads", args.threads),
    ]
    if params is not None:
        for name in _PIPELINE_PARAMS:
            entries.append((f"config.{name}", params[name]))
    return entries


def _load_dataset(args) -> Dataset:
    try:
        return load_csv(args.data, args.target, args.target_kind)
    except DataError as exc:
        raise CliError(str(exc), EXIT_DATA) from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    params = _resolve_params(args)
    depths = _parse_depths(params["depth"])
    if len(depths) != 1:
        raise CliError("train expects a single --depth", EXIT_CONFIG)
    if params["mode"] not in ("hard", "soft"):
        raise CliError(f"--mode must be hard or soft, got {params['mode']!r}", EXIT_CONFIG)
    config = _build_config(params, depths[0], params["mode"])
    dataset = _load_dataset(args)
    started = time.perf_counter()
    try:
        model = train(dataset, config, threads=args.threads)
    except TrainingError as exc:
        raise CliError(f"training failed: {exc}", EXIT_TRAIN) from exc
    save_model(model, args.out)
    elapsed = time.perf_counter() - started
    manifest_path = args.manifest or args.out + ".manifest"
    entries = _manifest_header("train", args, params)
    entries += [
        ("config.digest", config_digest(config)),
        ("input.data", args.data),
        ("input.data.sha256", _sha256_file(args.data)),
        ("input.target", args.target),
        ("input.target_kind", args.target_kind),
        ("output.model", args.out),
        ("ruleset.rules", model.n_rules),
        ("ruleset.digest", ruleset_digest(model.ruleset)),
        ("model.active_rules", model.n_active),
        ("model.lambda", repr(model.lambda_)),
        ("wallclock_seconds", f"{elapsed:.3f}"),
    ]
    _write_manifest(manifest_path, entries)
    print(
        f"trained {model.mode} model: {model.n_active}/{model.n_rules} rules retained, "
        f"lambda={model.lambda_:.6g} -> {args.out}"
    )
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        model = load_model(args.model)
    except (ModelFormatError, OSError) as exc:
        raise CliError(f"cannot load model: {exc}", EXIT_DATA) from exc
    try:
        features = load_feature_matrix(args.data, model.feature_names)
    except DataError as exc:
        raise CliError(str(exc), EXIT_DATA) from exc
    scores = predict(model, features)
    lines = ["prediction"] + [repr(v) for v in scores]
    _atomic_write(args.out, "\n".join(lines) + "\n")
    manifest_path = args.manifest or args.out + ".manifest"
    entries = _manifest_header("predict", args, None)
    entries += [
        ("input.model", args.model),
        ("input.model.sha256", _sha256_file(args.model)),
        ("input.data", args.data),
        ("input.data.sha256", _sha256_file(args.data)),
        ("output.predictions", args.out),
        ("rows", len(scores)),
    ]
    _write_manifest(manifest_path, entries)
    print(f"wrote {len(scores)} predictions -> {args.out}")
    return EXIT_OK


def _metric_columns(target_kind: str, chosen: str) -> list[str]:
    if chosen != "auto":
        return [chosen]
    return ["auc", "rmse"] if target_kind == "binary" else ["correlation", "rmse"]


def cmd_cv(args) -> int:
    params = _resolve_params(args)
    if args.folds < 2:
        raise CliError(f"--folds must be at least 2, got {args.folds}", EXIT_CONFIG)
    depths = _parse_depths(params["depth"])
    modes = ["hard", "soft"] if params["mode"] == "both" else [params["mode"]]
    if any(m not in ("hard", "soft") for m in modes):
        raise CliError(f"--mode must be hard, soft or both, got {params['mode']!r}", EXIT_CONFIG)
    dataset = _load_dataset(args)
    metrics = _metric_columns(args.target_kind, args.metric)
    started = time.perf_counter()

    header = ["depth", "mode"] + [f"pooled_{m}" for m in metrics] + [f"mean_{m}" for m in metrics]
    rows = []
    fold_rows = [
        "depth,mode,fold,n_test," + ",".join(metrics) + ",n_rules,n_active,lambda"
    ]
    for depth in depths:
        for mode in modes:
            config = _build_config(params, depth, mode)
            try:
                report = cross_validate(
                    dataset, config, k=args.folds, seed=params["seed"], threads=args.threads
                )
            except TrainingError as exc:
                raise CliError(f"training failed: {exc}", EXIT_TRAIN) from exc
            row = [str(depth), mode]
            row += [repr(report.pooled.get(m, float("nan"))) for m in metrics]
            row += [repr(report.mean.get(m, float("nan"))) for m in metrics]
            rows.append(row)
            for fr in report.per_fold:
                cells = [str(depth), mode, str(fr.fold), str(fr.n_test)]
                cells += [repr(fr.metrics.get(m, float("nan"))) for m in metrics]
                cells += [str(fr.n_rules), str(fr.n_active), repr(fr.lambda_)]
                fold_rows.append(",".join(cells))

    csv_text = ",".join(header) + "\n" + "\n".join(",".join(r) for r in rows) + "\n"
    _atomic_write(args.out, csv_text)
    folds_path = os.path.splitext(args.out)[0] + ".folds.csv"
    _atomic_write(folds_path, "\n".join(fold_rows) + "\n")

    widths = [max(len(h), 10) for h in header]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        pretty = [
            cell if i < 2 else f"{float(cell):.4f}" for i, cell in enumerate(row)
        ]
        print("  ".join(c.ljust(w) for c, w in zip(pretty, widths)))

    manifest_path = args.manifest or args.out + ".manifest"
    entries = _manifest_header("cv", args, params)
    entries += [
        ("folds", args.folds),
        ("metric", args.metric),
        ("input.data", args.data),
        ("input.data.sha256", _sha256_file(args.data)),
        ("output.metrics", args.out),
        ("output.fold_metrics", folds_path),
        ("wallclock_seconds", f"{time.perf_counter() - started:.3f}"),
    ]
    _write_manifest(manifest_path, entries)
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        dataset = generate(args.problem, args.n, args.seed, noise=not args.no_noise)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    write_csv(dataset, args.out, target_name="y")
    manifest_path = args.manifest or args.out + ".manifest"
    entries = _manifest_header("gen", args, None)
    entries += [
        ("problem", args.problem),
        ("n", args.n),
        ("seed", args.seed),
        ("noise", not args.no_noise),
        ("output.data", args.out),
        ("output.data.sha256", _sha256_file(args.out)),
    ]
    _write_manifest(manifest_path, entries)
    print(f"wrote {dataset.n} rows of {args.problem} -> {args.out}")
    return EXIT_OK


def run_benchmark(
    problem: str,
    reps: int,
    depths: list[int],
    trees: int,
    n: int,
    seed: int,
    threads: int = 1,
    lasso: LassoParams = LassoParams(),
):
    """Hard-vs-soft replication study on a synthetic problem.

    Per replication: fresh noisy train and test samples of size n; both
    modes share the same ensemble seed per (replication, depth) so they see
    identical rule sets. Returns (records, summary) where records hold one
    dict per (rep, depth, mode) with the test MSE.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    records = []
    for rep in range(reps):
        train_ds = generate(problem, n, derive_seed(seed, "train", rep), noise=True)
        test_ds = generate(problem, n, derive_seed(seed, "test", rep), noise=True)
        for depth in depths:
            ensemble_seed = derive_seed(seed, "model", rep, depth)
            for mode in ("hard", "soft"):
                config = PipelineConfig(
                    isle=IsleConfig(
                        num_trees=trees, max_depth=depth, seed=ensemble_seed
                    ),
                    mode=mode,
                    lasso=lasso,
                )
                model = train(train_ds, config, threads=threads)
                mse = metric_rmse(test_ds.target, predict(model, test_ds.features)) ** 2
                records.append(
                    {
                        "rep": rep,
                        "depth": depth,
                        "mode": mode,
                        "test_mse": mse,
                        "n_rules": model.n_rules,
                        "n_active": model.n_active,
                    }
                )
    summary = []
    for depth in depths:
        by_mode = {}
        for mode in ("hard", "soft"):
            vals = np.array(
                [r["test_mse"] for r in records if r["depth"] == depth and r["mode"] == mode]
            )
            by_mode[mode] = vals
            summary.append(
                {
                    "depth": depth,
                    "mode": mode,
                    "mean_mse": float(vals.mean()),
                    "sd_mse": float(vals.std(ddof=1)) if reps > 1 else 0.0,
                }
            )
        wins = float(np.mean(by_mode["soft"] < by_mode["hard"]))
        summary.append({"depth": depth, "mode": "soft_win_rate", "mean_mse": wins, "sd_mse": ""})
    return records, summary


def cmd_bench(args) -> int:
    depths = _parse_depths(args.depths)
    started = time.perf_counter()
    try:
        records, summary = run_benchmark(
            args.problem, args.reps, depths, args.trees, args.n, args.seed, args.threads
        )
    except TrainingError as exc:
        raise CliError(f"training failed: {exc}", EXIT_TRAIN) from exc
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    rec_lines = ["rep,depth,mode,test_mse,n_rules,n_active"]
    rec_lines += [
        f"{r['rep']},{r['depth']},{r['mode']},{r['test_mse']!r},{r['n_rules']},{r['n_active']}"
        for r in records
    ]
    _atomic_write(args.out, "\n".join(rec_lines) + "\n")
    summary_path = os.path.splitext(args.out)[0] + ".summary.csv"
    sum_lines = ["depth,mode,mean_mse,sd_mse"]
    sum_lines += [
        f"{s['depth']},{s['mode']},{s['mean_mse']!r},{s['sd_mse']!r}" for s in summary
    ]
    _atomic_write(summary_path, "\n".join(sum_lines) + "\n")
    for s in summary:
        if s["mode"] == "soft_win_rate":
            print(f"depth {s['depth']}: soft wins {100 * s['mean_mse']:.0f}% of replications")
        else:
            print(f"depth {s['depth']} {s['mode']}: mean test MSE {s['mean_mse']:.4f}")
    manifest_path = args.manifest or args.out + ".manifest"
    entries = _manifest_header("bench", args, None)
    entries += [
        ("problem", args.problem),
        ("reps", args.reps),
        ("depths", args.depths),
        ("trees", args.trees),
        ("n", args.n),
        ("seed", args.seed),
        ("output.records", args.out),
        ("output.summary", summary_path),
        ("wallclock_seconds", f"{time.perf_counter() - started:.3f}"),
    ]
    _write_manifest(manifest_path, entries)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("pipeline")
    g.add_argument("--mode", choices=("hard", "soft", "both"), default=None)
    g.add_argument("--depth", default=None, help="tree depth, N or N..M")
    g.add_argument("--trees", type=int, default=None, help="ensemble size M")
    g.add_argument("--row-fraction", dest="row_fraction", type=float, default=None)
    g.add_argument("--col-fraction", dest="col_fraction", type=float, default=None)
    g.add_argument("--memory", type=float, default=None, help="memory parameter in [0, 1]")
    g.add_argument("--min-leaf", dest="min_leaf", type=int, default=None)
    g.add_argument("--grid-size", dest="grid_size", type=int, default=None)
    g.add_argument("--lambda-min-ratio", dest="lambda_min_ratio", type=float, default=None)
    g.add_argument("--lasso-cv-folds", dest="lasso_cv_folds", type=int, default=None)
    g.add_argument("--firth-tol", dest="firth_tol", type=float, default=None)
    g.add_argument("--firth-max-iter", dest="firth_max_iter", type=int, default=None)
    g.add_argument("--min-support", dest="min_support", type=float, default=None)
    g.add_argument("--max-support", dest="max_support", type=float, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--config", default=None, help="flat key=value config file")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--manifest", default=None, help="manifest path (default <out>.manifest)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softrules",
        description="Rule ensembles with hard or smooth rules.",
    )
    parser.add_argument("--version", action="version", version=f"softrules {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("train", help="fit a model and write a model file")
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--target-kind", dest="target_kind", choices=("continuous", "binary"), default="continuous")
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score new rows with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="k-fold cross-validated metrics")
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--target-kind", dest="target_kind", choices=("continuous", "binary"), default="continuous")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--metric", choices=("auto", "correlation", "rmse", "auc"), default="auto")
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("gen", help="generate a synthetic benchmark dataset")
    p.add_argument("--problem", choices=("friedman1", "friedman2"), required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="hard-vs-soft replication study")
    p.add_argument("--problem", choices=("friedman1", "friedman2"), required=True)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--depths", default="2..4", help="tree depths, N or N..M")
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"softrules {args.subcommand}: {exc}", file=sys.stderr)
        return exc.code
    except DataError as exc:
        print(f"softrules {args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_DATA


def main_entry() -> None:
    sys.exit(main())
