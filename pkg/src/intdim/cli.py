"""Command-line interface: ``intdim <command> [options]``.

Every command writes one JSON report (stdout unless ``--output``) and,
where a table makes sense, an optional CSV via ``--csv``. Options may also
come from ``--config FILE``, a ``key = value`` file using the long option
names (``-`` or ``_``); flags given on the command line win.
"""

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .dataset import DatasetSource, deduplicate, filter_classes, load, save_raw_tensor
from .estimators import ESTIMATORS, EstimatorSpec, draw_anchors, estimate, estimate_k_sweep
from .exceptions import ConfigError, DatasetError, EstimatorError, IntdimError, KnnError
from .formats import read_header
from .knn import cached_knn
from .stats import convergence_curve, replicate_estimate
from .synth import KINDS, NOISE_MODES, NoiseSpec, SyntheticSpec, add_hypercube_noise, generate

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_DATASET, EXIT_ESTIMATOR = 0, 1, 2, 3, 4
COMMANDS = ("estimate", "generate", "noise", "convergence", "compare", "knn-cache")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _int_list(text):
    try:
        values = [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _shape(text):
    parts = str(text).lower().replace(",", "x").split("x")
    try:
        shape = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxWxC, got {text!r}") from None
    if len(shape) != 3:
        raise argparse.ArgumentTypeError(f"expected HxWxC, got {text!r}")
    return shape


def _add_dataset(p, required=True):
    g = p.add_argument_group("dataset")
    g.add_argument("--dataset", required=required, metavar="KIND:PATH",
                   help="idx | cifar10-binary | csv | raw-tensor | image-directory, e.g. mnist-idx:/data/mnist")
    g.add_argument("--no-scale", action="store_true", help="keep pixel values in [0, 255]")
    g.add_argument("--resize", type=_shape, metavar="HxWxC", help="nearest-neighbor resize of image rows")
    g.add_argument("--classes", type=_int_list, help="keep only these labels")
    g.add_argument("--label-column", action="store_true", help="last CSV column holds labels")
    g.add_argument("--no-dedup", action="store_true", help="do not drop duplicate rows")


def _add_estimator(p, multi_k=True):
    g = p.add_argument_group("estimator")
    g.add_argument("--estimator", choices=ESTIMATORS, default="mle")
    g.add_argument("--k", type=_int_list if multi_k else int,
                   help="MLE neighbor count(s) or geodesic graph degree")
    g.add_argument("--aggregation", choices=("mackay", "levina"), default="mackay")
    g.add_argument("--alpha", type=float, default=1.0, help="MLE anchor fraction")
    g.add_argument("--unbiased", action="store_true", help="MLE with the k-2 normalization")
    g.add_argument("--discard", type=float, default=0.1, help="TwoNN discard fraction")
    g.add_argument("--k1", type=int, default=20)
    g.add_argument("--k2", type=int, default=55)
    g.add_argument("--M", type=int, default=20, help="GeoMLE bootstrap resamples")
    g.add_argument("--degree", type=int, default=2, help="GeoMLE polynomial degree")
    g.add_argument("--bins", type=int, default=1000, help="geodesic histogram bins")
    g.add_argument("--sample-cap", type=int, help="GeoMLE / geodesic subsample cap")


def _add_output(p, table=True):
    p.add_argument("--output", help="report path (default: stdout)")
    if table:
        p.add_argument("--csv", help="also write the result table as CSV")


def build_parser():
    parser = _Parser(prog="intdim", description="Intrinsic dimension estimation")
    parser.add_argument("--version", action="version", version=f"intdim {__version__}")
    parser.add_argument("--config", help="key = value file mirroring the long options")
    parser.add_argument("--threads", type=int, help="worker threads (default: $INTDIM_THREADS or all cores)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate the ID of a dataset")
    _add_dataset(p)
    _add_estimator(p)
    p.add_argument("--R", type=int, default=1, help="replicates (seeds seed+i)")
    p.add_argument("--subsample", type=int, help="rows drawn per replicate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cache-dir", help="neighbor-table cache directory")
    _add_output(p)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data-out", required=True, help="raw-tensor header path to write")
    p.add_argument("--dtype", choices=("float32", "float64"), default="float64")
    _add_output(p, table=False)

    p = sub.add_parser("noise", help="add hypercube noise to a dataset")
    _add_dataset(p)
    p.add_argument("--d-noise", type=int, required=True)
    p.add_argument("--mode", choices=NOISE_MODES, default="replace-pixels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data-out", required=True, help="raw-tensor header path to write")
    p.add_argument("--dtype", choices=("float32", "float64"), default="float64")
    _add_output(p, table=False)

    p = sub.add_parser("convergence", help="estimate vs sample size")
    _add_dataset(p)
    _add_estimator(p, multi_k=False)
    p.add_argument("--sizes", type=_int_list, required=True)
    p.add_argument("--R", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    _add_output(p)

    p = sub.add_parser("compare", help="run every estimator on one dataset")
    _add_dataset(p)
    p.add_argument("--k", type=int, default=5, help="MLE neighbor count")
    p.add_argument("--unbiased", action="store_true")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--discard", type=float, default=0.1)
    p.add_argument("--geo-k", type=int, default=4, help="geodesic graph degree")
    p.add_argument("--bins", type=int, default=1000)
    p.add_argument("--sample-cap", type=int, help="GeoMLE subsample cap")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cache-dir")
    _add_output(p)

    p = sub.add_parser("knn-cache", help="precompute a neighbor table")
    _add_dataset(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cache-dir", required=True)
    _add_output(p, table=False)
    return parser


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _apply_config(parser, argv):
    """Merge a ``--config`` file into ``argv`` as subcommand defaults."""
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    pre.add_argument("--threads")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return argv
    try:
        config = read_header(known.config)
    except (OSError, DatasetError) as exc:
        raise ConfigError(f"cannot read config {known.config}: {exc}") from None
    config = {k.replace("-", "_"): v for k, v in config.items()}
    command = config.pop("command", None)
    if rest and rest[0] in COMMANDS:
        command, rest = rest[0], rest[1:]
    elif command is None:
        raise ConfigError("no command given on the command line or in the config file")
    elif command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r} in config; expected one of {COMMANDS}")
    argv = ["--config", known.config]
    if known.threads is not None:
        argv += ["--threads", known.threads]
    argv += [command] + rest
    sub = parser._subparsers._group_actions[0].choices[command]
    actions = {a.dest: a for a in sub._actions}
    top = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, value in config.items():
        action = actions.get(key) or top.get(key)
        if action is None or key in ("help", "config"):
            raise ConfigError(f"config key {key!r} is not an option of {command}")
        if isinstance(action, argparse._StoreTrueAction):
            low = value.lower()
            if low not in _TRUE | _FALSE:
                raise ConfigError(f"config key {key!r} expects true/false, got {value!r}")
            value = low in _TRUE
        elif action.type is not None:
            try:
                value = action.type(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise ConfigError(f"config key {key!r} must be one of {list(action.choices)}")
        if key in actions:
            defaults[key] = value
            action.required = False
        else:
            parser.set_defaults(**{key: value})
    sub.set_defaults(**defaults)
    return argv


def _config_echo(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("output", "csv", "config", "threads")}


def _load(args):
    source = DatasetSource.parse(
        args.dataset, scale=not args.no_scale, resize=args.resize, label_column=args.label_column
    )
    ps = load(source)
    if args.classes:
        ps = filter_classes(ps, args.classes)
    return ps


def _load_dedup(args):
    ps = _load(args)
    if args.no_dedup:
        return ps, 0
    return deduplicate(ps)


def _spec(args, k=None):
    name = args.estimator
    if name == "mle":
        return EstimatorSpec("mle", {"k": k if k is not None else 20, "aggregation": args.aggregation,
                                     "anchor_fraction": args.alpha, "unbiased": args.unbiased})
    if name == "twonn":
        return EstimatorSpec("twonn", {"discard_fraction": args.discard})
    if name == "geomle":
        return EstimatorSpec("geomle", {"k1": args.k1, "k2": args.k2, "M": args.M, "degree": args.degree,
                                        "sample_cap": args.sample_cap})
    params = {"k": k if k is not None else 4, "bins": args.bins}
    if args.sample_cap is not None:
        params["sample_cap"] = args.sample_cap
    return EstimatorSpec("geodesic", params)


def _dataset_info(ps, removed, args):
    return {"source": args.dataset, "name": ps.name, "n": ps.n_samples, "N": ps.n_features,
            "dedup_removed": removed, "scaled": bool(ps.meta.get("scaled", False))}


def cmd_estimate(args, n_jobs):
    ps = _load(args)
    ks = args.k if args.k else [None]
    dedup = not args.no_dedup
    if args.estimator != "mle" and len(ks) > 1:
        raise ConfigError(f"{args.estimator} takes a single --k")
    if args.estimator == "mle" and len(ks) > 1 and args.R == 1 and args.subsample is None:
        reports = estimate_k_sweep(ps, ks, aggregation=args.aggregation, anchor_fraction=args.alpha,
                                   unbiased=args.unbiased, seed=args.seed, dedup=dedup, n_jobs=n_jobs,
                                   cache_dir=args.cache_dir)
    elif args.R == 1 and args.subsample is None:
        reports = [estimate(ps, _spec(args, ks[0]), seed=args.seed, dedup=dedup, n_jobs=n_jobs,
                            cache_dir=args.cache_dir)]
    else:
        reports = [replicate_estimate(ps, _spec(args, k), args.R, args.seed, subsample_size=args.subsample,
                                      dedup=dedup, n_jobs=n_jobs, cache_dir=args.cache_dir) for k in ks]
    removed = reports[0].dedup_removed
    label = (lambda r: f"k={r.params['k']}") if args.estimator == "mle" else (lambda r: args.estimator)
    table = {"columns": ["dataset"] + [label(r) for r in reports],
             "rows": [[ps.name] + [round(r.estimate, 1) for r in reports]]}
    return {"dataset": _dataset_info(ps, removed, args), "anchor_fraction": args.alpha,
            "results": [r.to_dict() for r in reports], "table": table}


def cmd_generate(args, n_jobs):
    spec = SyntheticSpec(args.kind, args.d, args.N, args.n, args.seed)
    ps = generate(spec)
    extra = {f"synthetic_{k}": v for k, v in vars(spec).items()}
    save_raw_tensor(ps, args.data_out, dtype=args.dtype, extra=extra)
    return {"dataset": {"n": ps.n_samples, "N": ps.n_features, "dedup_removed": 0},
            "anchor_fraction": None, "written": str(args.data_out), "results": []}


def cmd_noise(args, n_jobs):
    ps = _load(args)
    spec = NoiseSpec(args.d_noise, args.mode, args.seed)
    noisy = add_hypercube_noise(ps, spec)
    extra = {f"noise_{k}": v for k, v in vars(spec).items()}
    save_raw_tensor(noisy, args.data_out, dtype=args.dtype, extra=extra)
    return {"dataset": _dataset_info(ps, 0, args), "anchor_fraction": None,
            "written": str(args.data_out), "results": []}


def cmd_convergence(args, n_jobs):
    ps, removed = _load_dedup(args)
    curve = convergence_curve(ps, _spec(args, args.k), args.sizes, args.R, args.seed, dedup=False, n_jobs=n_jobs)
    rows = curve.rows()
    table = {"columns": ["m", "mean", "stderr", "R"], "rows": [[r["m"], r["mean"], r["stderr"], r["R"]] for r in rows]}
    return {"dataset": _dataset_info(ps, removed, args), "anchor_fraction": args.alpha,
            "curve": {"sample_sizes": curve.sample_sizes, "mean_estimates": curve.mean_estimates,
                      "stderrs": curve.stderrs, "replicates": curve.replicates, "spec": curve.spec,
                      "per_replicate": curve.per_replicate},
            "results": [], "table": table}


def cmd_compare(args, n_jobs):
    ps = _load(args)
    dedup = not args.no_dedup
    specs = [
        EstimatorSpec("mle", {"k": args.k, "anchor_fraction": args.alpha, "unbiased": args.unbiased}),
        EstimatorSpec("twonn", {"discard_fraction": args.discard}),
        EstimatorSpec("geomle", {"sample_cap": args.sample_cap}),
        EstimatorSpec("geodesic", {"k": args.geo_k, "bins": args.bins}),
    ]
    reports = [estimate(ps, s, seed=args.seed, dedup=dedup, n_jobs=n_jobs, cache_dir=args.cache_dir) for s in specs]
    table = {"columns": ["estimator", "estimate"],
             "rows": [[r.estimator, round(r.estimate, 1)] for r in reports]}
    return {"dataset": _dataset_info(ps, reports[0].dedup_removed, args), "anchor_fraction": args.alpha,
            "results": [r.to_dict() for r in reports], "table": table}


def cmd_knn_cache(args, n_jobs):
    ps, removed = _load_dedup(args)
    anchors = draw_anchors(ps.n_samples, args.alpha, args.seed)
    table = cached_knn(ps, args.k, anchors, cache_dir=args.cache_dir, n_jobs=n_jobs)
    return {"dataset": _dataset_info(ps, removed, args), "anchor_fraction": args.alpha,
            "cache": {"dir": str(Path(args.cache_dir)), "k": table.k, "anchors": table.n_anchors,
                      "checksum": ps.checksum()},
            "results": []}


_HANDLERS = {
    "estimate": cmd_estimate,
    "generate": cmd_generate,
    "noise": cmd_noise,
    "convergence": cmd_convergence,
    "compare": cmd_compare,
    "knn-cache": cmd_knn_cache,
}


def run(args):
    """Execute parsed ``args``; returns the report dict."""
    if args.threads is not None and args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    body = _HANDLERS[args.command](args, args.threads)
    report = {"tool": "intdim", "version": __version__, "command": args.command,
              "config": _config_echo(args), "seed": args.seed}
    report.update(body)
    return report


def _write_csv(path, table):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table["columns"])
        writer.writerows(table["rows"])


def _format_table(table):
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
    writer.writerow(table["columns"])
    writer.writerows(table["rows"])
    return buf.getvalue()


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError(f"a command is required: one of {', '.join(COMMANDS)}")
        report = run(args)
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
        if args.output:
            Path(args.output).write_text(text)
            if "table" in report:
                sys.stderr.write(_format_table(report["table"]))
        else:
            sys.stdout.write(text)
        if getattr(args, "csv", None) and "table" in report:
            _write_csv(args.csv, report["table"])
        return EXIT_OK
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    except DatasetError as exc:
        return _fail(exc, EXIT_DATASET)
    except (KnnError, EstimatorError) as exc:
        return _fail(exc, EXIT_ESTIMATOR)
    except (IntdimError, OSError) as exc:
        return _fail(exc, EXIT_OTHER)


def _fail(exc, status):
    sys.stderr.write(f"intdim: error: {exc}\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
