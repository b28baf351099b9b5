"""Command-line entry point: ``ganfault <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime error. Each run writes the
fully resolved configuration to ``<out>.config.json`` next to its output.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .exceptions import GanFaultError
from .experiment import BenchmarkConfig, default_test_faults, make_benchmark
from .ganae import GanAutoencoder
from .grouptest import descriptors, two_sample_test
from .modelio import load_model, save_model
from .report import (
    ConfusionReport,
    confusion_from_predictions,
    encoding_dim_sweep,
    parse_structured,
    render_report,
)
from .simulator import (
    load_dataset,
    read_config,
    save_dataset,
    simulate,
    system_from_config,
    window_normalize,
)
from .svm import NuSVMClassifier, cross_validate_nu

logger = logging.getLogger("ganfault")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("list is empty")
    return vals


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("list is empty")
    return vals


def _threshold(text):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("threshold must be a number in (0, 1) or 'auto'") from None


def _write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _log_config(out, command, values):
    doc = {"command": command, "version": __version__, "config": values}
    _write_text(f"{out}.config.json", json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _windows_from_csv(path, window, stride, norm=None):
    return window_normalize(load_dataset(path), window, stride, norm)


# -- subcommands ------------------------------------------------------------

def cmd_simulate(args):
    cfg = read_config(args.config)
    system, horizon, faults, seed = system_from_config(cfg)
    if args.seed is not None:
        seed = args.seed
    if args.horizon is not None:
        horizon = args.horizon
    ds = simulate(system, horizon, faults, seed)
    save_dataset(ds, args.out)
    _log_config(args.out, "simulate", {
        "config_file": args.config, "seed": seed, "horizon": horizon,
        "n": system.n, "m": system.m, "p": system.p, "q": system.q,
        "sample_period_s": system.sample_period_s,
        "faults": [vars(f) for f in faults],
    })


def cmd_train_ganae(args):
    win = _windows_from_csv(args.data, args.window, args.stride)
    model = GanAutoencoder(
        encoding_dim=args.encoding_dim, prior=args.prior, epochs=args.epochs,
        batch_size=args.batch_size, learning_rate=args.lr, threshold=args.threshold,
        false_alarm_rate=args.false_alarm_rate, warm_start_epochs=args.warm_start_epochs,
        center_prior=not args.uncentered, random_state=args.seed,
    )
    model.fit(win.X, np.asarray(win.labels))
    save_model(args.out, model, win.norm, args.window, args.stride)
    _log_config(args.out, "train-ganae", {
        "data": args.data, "window": args.window, "stride": args.stride,
        "n_windows": int(win.is_normal.sum()), **model.get_params(),
        "encoding_dim_resolved": model.encoding_dim_, "threshold_resolved": model.threshold_,
    })


def cmd_train_svm(args):
    win = _windows_from_csv(args.data, args.window, args.stride)
    y = np.asarray(win.binary_labels)
    params = dict(kernel=args.kernel, sigma=args.sigma, degree=args.degree,
                  coef0=args.coef0, scale=args.scale)
    if len(args.nu) == 1:
        best, table = args.nu[0], {}
    else:
        best, table = cross_validate_nu(win.X, y, tuple(args.nu), args.folds, args.seed, **params)
    model = NuSVMClassifier(nu=best, **params).fit(win.X, y)
    save_model(args.out, model, win.norm, args.window, args.stride)
    _log_config(args.out, "train-svm", {
        "data": args.data, "window": args.window, "stride": args.stride,
        "n_windows": len(win), "nu_grid": args.nu, "folds": args.folds, "seed": args.seed,
        "nu_resolved": best, "cv_accuracy": {str(k): v for k, v in table.items()}, **params,
    })


def _load_for_data(model_path, data_path):
    model, norm, window, stride = load_model(model_path)
    if norm is None or window is None or stride is None:
        raise GanFaultError("model file lacks normalization/window metadata")
    return model, _windows_from_csv(data_path, window, stride, norm)


def cmd_detect(args):
    model, win = _load_for_data(args.model, args.data)
    pred = model.predict(win.X)
    rep = confusion_from_predictions(win.labels, pred, args.convention, name=args.name or os.path.basename(args.model))
    _write_text(args.out, render_report([rep], args.format))
    if args.predictions:
        scores = model.decision_function(win.X)
        lines = ["index,label,predicted,score"]
        lines += [f"{i},{lab},{p},{s!r}" for i, (lab, p, s) in
                  enumerate(zip(win.labels, pred, scores.tolist()))]
        _write_text(args.predictions, "\n".join(lines) + "\n")
    _log_config(args.out, "detect", {
        "model": args.model, "data": args.data, "format": args.format,
        "convention": args.convention, "predictions": args.predictions,
    })


def cmd_group_test(args):
    model, win = _load_for_data(args.model, args.data)
    if not isinstance(model, GanAutoencoder):
        raise GanFaultError("group-test needs a gan-ae model")
    normal = win.X[win.is_normal]
    if len(normal) == 0:
        raise GanFaultError("data has no normal windows")
    n = args.n_samples or len(normal)
    codes_data = model.transform(normal[:n])
    source = normal if model.prior == "orthogonal" else None
    codes_gen = model.transform(model.generate(n, args.seed, X_source=source))
    w = None if args.rank_mode == "per-sample" else args.rank_window
    res = two_sample_test(descriptors(codes_data, w), descriptors(codes_gen, w), args.alpha,
                          args.literal_inequality)
    doc = {
        "statistic": res.statistic, "threshold": res.threshold, "reject": res.reject,
        "mmd_squared": res.mmd_squared, "alpha": res.alpha, "n1": res.n1, "n2": res.n2,
        "literal_inequality": res.literal_inequality, "rank_mode": args.rank_mode,
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_text(args.out, text)
        _log_config(args.out, "group-test", {
            "model": args.model, "data": args.data, "alpha": args.alpha,
            "rank_mode": args.rank_mode, "rank_window": args.rank_window,
            "n_samples": n, "seed": args.seed, "literal_inequality": args.literal_inequality,
        })
    else:
        sys.stdout.write(text)


def cmd_sweep(args):
    bench = BenchmarkConfig(window=args.window, stride=args.stride,
                            train_horizon=args.train_horizon, test_horizon=args.test_horizon,
                            faults=default_test_faults(args.test_horizon))
    params = dict(prior=args.prior, epochs=args.epochs, threshold=args.threshold,
                  false_alarm_rate=args.false_alarm_rate)
    rows = encoding_dim_sweep(lambda s: make_benchmark(s, bench), args.dims, args.seeds, **params)
    _write_text(args.out, render_report([], args.format, rows))
    _log_config(args.out, "sweep", {
        "dims": args.dims, "seeds": args.seeds, "window": args.window, "stride": args.stride,
        "train_horizon": args.train_horizon, "test_horizon": args.test_horizon, **params,
    })


def cmd_report(args):
    reports, sweep = [], []
    for path in args.inputs:
        with open(path) as fh:
            r, s = parse_structured(fh.read())
        reports += r
        sweep += s
    if args.rates:
        tpr, tnr = args.rates
        reports.append(ConfusionReport.from_rates(tpr, tnr, name="from rates"))
    text = render_report(reports, args.format, sweep)
    if args.out:
        _write_text(args.out, text)
        _log_config(args.out, "report", {"inputs": args.inputs, "format": args.format,
                                         "rates": args.rates})
    else:
        sys.stdout.write(text)


# -- parser -----------------------------------------------------------------

def build_parser():
    p = _Parser(prog="ganfault", description="Fault detection with an adversarially trained autoencoder.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", help="simulate the closed-loop plant to CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--horizon", type=int)
    s.set_defaults(func=cmd_simulate)

    def windows(sp):
        sp.add_argument("--window", type=int, default=8)
        sp.add_argument("--stride", type=int, default=2)

    s = sub.add_parser("train-ganae", help="train the detector on the normal records of a CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    windows(s)
    s.add_argument("--prior", choices=("orthogonal", "gaussian"), default="orthogonal")
    s.add_argument("--encoding-dim", type=int)
    s.add_argument("--epochs", type=int, default=30)
    s.add_argument("--batch-size", type=int, default=64)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--threshold", type=_threshold, default=0.5)
    s.add_argument("--false-alarm-rate", type=float, default=0.05)
    s.add_argument("--warm-start-epochs", type=int, default=0)
    s.add_argument("--uncentered", action="store_true", help="project raw, not centred, windows")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_train_ganae)

    s = sub.add_parser("train-svm", help="train the nu-SVM baseline on labeled windows")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    windows(s)
    s.add_argument("--kernel", choices=("rbf", "polynomial"), default="rbf")
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--degree", type=int, default=3)
    s.add_argument("--coef0", type=float, default=1.0)
    s.add_argument("--scale", type=float, default=1.0)
    s.add_argument("--nu", type=_float_list, default=[0.5, 0.6, 0.7, 0.8, 0.9],
                   help="one value, or a comma-separated grid to cross-validate")
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_train_svm)

    s = sub.add_parser("detect", help="classify windows and write a confusion report")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=("text", "structured"), default="structured")
    s.add_argument("--convention", choices=("equal", "empirical"), default="equal")
    s.add_argument("--name", default="")
    s.add_argument("--predictions", help="optional per-window CSV of predictions")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("group-test", help="MMD test: encoded normal data vs encoded generator output")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--rank-mode", choices=("per-sample", "window"), default="per-sample")
    s.add_argument("--rank-window", type=int, default=4)
    s.add_argument("--n-samples", type=int, default=200)
    s.add_argument("--literal-inequality", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_group_test)

    s = sub.add_parser("sweep", help="fault TPR and reconstruction error vs encoding dim")
    s.add_argument("--out", required=True)
    s.add_argument("--dims", type=_int_list, default=[2, 8, 32])
    s.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3, 4])
    s.add_argument("--prior", choices=("orthogonal", "gaussian"), default="orthogonal")
    s.add_argument("--epochs", type=int, default=30)
    s.add_argument("--threshold", type=_threshold, default="auto")
    s.add_argument("--false-alarm-rate", type=float, default=0.05)
    windows(s)
    s.add_argument("--train-horizon", type=int, default=5760)
    s.add_argument("--test-horizon", type=int, default=4320)
    s.add_argument("--format", choices=("text", "structured", "svg-plot"), default="structured")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", help="re-render structured reports")
    s.add_argument("inputs", nargs="*")
    s.add_argument("--rates", type=float, nargs=2, metavar=("TPR", "TNR"),
                   help="add a report built from per-class rates")
    s.add_argument("--format", choices=("text", "structured", "svg-plot"), default="text")
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report" and not args.inputs and not args.rates:
        parser.print_usage(sys.stderr)
        print("ganfault report: error: give input files or --rates", file=sys.stderr)
        return 1
    try:
        args.func(args)
    except (GanFaultError, OSError, ValueError) as exc:
        print(f"ganfault {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
