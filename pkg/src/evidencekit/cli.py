"""Command-line entry point: ``evidencekit <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 domain or infeasibility error,
3 input/output or file-format error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import correlation, indicators, kofn, planner, redundancy, simulator, trainer
from .csvio import (load_indicator_matrix, load_softmax_tensor, save_indicator_matrix,
                    save_softmax_tensor)
from .errors import DomainError, EvidenceError, FormatError, TrainingDivergedError

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3
PRESETS = {"lower": "lower.cfg", "upper": "upper.cfg"}
GLOBAL_DEFAULTS = {"format": "json", "paper_mode": False, "jobs": 1, "seed": 0, "plot_dir": None}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _number(text):
    """Float that also accepts fractions like ``1/2``."""
    try:
        return float(Fraction(text.strip())) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _count(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a count: {text!r}") from None
    if not value.is_integer() or value < 0:
        raise argparse.ArgumentTypeError(f"not a nonnegative integer: {text!r}")
    return int(value)


def _grid(text):
    try:
        values = [_number(part) for part in text.split(",") if part.strip()]
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected a,b,c") from None
    if not values:
        raise argparse.ArgumentTypeError("grid is empty")
    return values


def _pair(text):
    try:
        i, j = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected i,j, got {text!r}") from None
    return i, j


# -- output ------------------------------------------------------------------

def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        for k, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{k}]")
    else:
        yield prefix, obj


def _text_value(v):
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return " ".join(_text_value(x) for x in v)
    return str(v)


def render(report: dict, fmt: str) -> str:
    report = _plain(report)
    if fmt == "json":
        return json.dumps(report, indent=2, allow_nan=False) + "\n"
    rows = list(_flatten(report))
    width = max((len(k) for k, _ in rows), default=0)
    return "".join(f"{k.ljust(width)}  {_text_value(v)}\n" for k, v in rows)


def _plotting():
    from . import plotting  # matplotlib is only imported when figures are requested

    return plotting


def _plots(args, makers):
    """Render figures only when ``--plot-dir`` is set; returns written paths.

    ``makers`` pairs a file name with a callable taking the output path.
    """
    if not args.plot_dir:
        return []
    return [str(draw(Path(args.plot_dir) / name)) for name, draw in makers]


# -- subcommands -------------------------------------------------------------

ASSUMPTION_FLAGS = [f.name for f in fields(planner.CampaignAssumptions)]


def cmd_plan(args):
    if args.config and args.preset:
        raise UsageError("plan: use either --config or --preset, not both")
    if args.config:
        path = Path(args.config)
        text = path.read_text(encoding="utf-8")
    else:
        preset = args.preset or "lower"
        path = PRESETS[preset]
        text = resources.files("evidencekit").joinpath("data", path).read_text(encoding="utf-8")
    overrides = {name: getattr(args, name) for name in ASSUMPTION_FLAGS}
    assumptions = planner.parse_assumptions(text, overrides, path=str(path))
    report = planner.frame_requirement(assumptions, paper_mode=args.paper_mode)
    out = {
        "assumptions": asdict(assumptions),
        "p_tol_per_frame": assumptions.p_tol_per_frame,
        "requirement": report.to_dict(),
    }
    plots = _plots(args, [("plan_stages.png",
                           lambda p: _plotting().plot_requirement_stages(report, p))])
    return out, plots


def cmd_test(args):
    out = {
        "p_tol": args.p_tol,
        "alpha": args.alpha,
        "zero_failure_sample_size": planner.zero_failure_sample_size(args.p_tol, args.alpha),
        "poisson_sample_size": planner.poisson_sample_size(args.p_tol, args.alpha),
        "statistical_factor": planner.statistical_factor(args.alpha),
    }
    if args.samples is not None:
        decision = planner.binomial_test(args.samples, args.failures, args.p_tol, args.alpha)
        out["decision"] = asdict(decision)
    elif args.failures:
        raise UsageError("test: --failures needs --samples")
    return out, []


def cmd_redundancy(args):
    plan = redundancy.subsystem_sample_size(args.p_tol, args.alpha, args.n)
    out = {"plan": plan.to_dict()}
    if args.n >= 2:
        out["reduction_factor_uncorrected"] = redundancy.reduction_factor_uncorrected(args.p_tol, args.n)
    if args.frames is not None:
        out["chain"] = redundancy.redundant_frame_chain(args.frames, args.p_tol, args.alpha,
                                                        args.n, args.rho).to_dict()
    if args.p_sub is not None and args.rho is not None:
        out["pair_failure_probability"] = redundancy.pair_failure_probability(
            args.p_sub, args.p_sub, args.rho)
        out["pair_failure_probability_approx"] = redundancy.pair_failure_probability_approx(
            args.p_sub, args.rho)
    return out, []


def _convention(args):
    if args.paper_mode:
        return correlation.QuantileConvention.ONE_SIDED
    return correlation.QuantileConvention.TWO_SIDED


def cmd_corr_ci(args):
    ci = correlation.correlation_ci(args.rho, args.samples, args.alpha, _convention(args))
    out = ci.to_dict()
    out["convention"] = _convention(args).value
    out["width"] = ci.width
    return out, []


def cmd_corr_evidence(args):
    conv = _convention(args)
    z = correlation.critical_value(args.alpha, conv)
    return {
        "p_tol": args.p_tol,
        "alpha": args.alpha,
        "convention": conv.value,
        "z": z,
        "z_squared": z * z,
        "rho_bound": math.sqrt(args.p_tol),
        "sample_size": correlation.correlation_evidence_sample_size(args.p_tol, args.alpha, conv),
    }, []


def cmd_kofn(args):
    if args.indicators:
        matrix = load_indicator_matrix(args.indicators)
        curve = kofn.k_of_n_curve(matrix)
        out = {"source": str(args.indicators), "n": matrix.n_models,
               "empirical": {str(k): v for k, v in enumerate(curve, start=1)}}
        theory = None
        if args.p_sub is not None:
            theory = [kofn.theoretical_k_of_n(args.p_sub, matrix.n_models, k)
                      for k in range(1, matrix.n_models + 1)]
            out["theoretical"] = {str(k): v for k, v in enumerate(theory, start=1)}
        return out, _plots(args, [("kofn.png",
                                   lambda p: _plotting().plot_k_of_n(curve, p, theory))])
    if args.p_sub is None or args.n is None:
        raise UsageError("kofn: give --p-sub and --n, or --indicators")
    ks = [args.k] if args.k is not None else list(range(1, args.n + 1))
    values = {str(k): kofn.theoretical_k_of_n(args.p_sub, args.n, k) for k in ks}
    out = {"p_sub": args.p_sub, "n": args.n, "reliability": values}
    if args.k is not None:
        out["reliability"] = values[str(args.k)]
    return out, []


def cmd_analyze(args):
    if bool(args.indicators) == bool(args.softmax):
        raise UsageError("analyze: give exactly one of --indicators or --softmax")
    if args.indicators:
        matrix = load_indicator_matrix(args.indicators)
        softmax = None
    else:
        softmax = load_softmax_tensor(args.softmax)
        matrix = softmax.indicators()
    report = indicators.correlation_report(matrix, args.alpha)
    out = report.to_dict()
    out["k_of_n"] = {str(k): v for k, v in enumerate(kofn.k_of_n_curve(matrix), start=1)}
    rho = _plain(out["pairwise_rho"])
    curve = kofn.k_of_n_curve(matrix)
    makers = [("correlation_matrix.png",
               lambda p: _plotting().plot_correlation_matrix(list(matrix.model_names), rho, p)),
              ("kofn.png", lambda p: _plotting().plot_k_of_n(curve, p))]
    if softmax is not None:
        _, committee_err = indicators.committee_predict(softmax)
        out["committee_accuracy"] = 1.0 - float(committee_err.mean())
        pairs = [args.pair] if args.pair else [(i, j) for i in range(matrix.n_models)
                                               for j in range(i + 1, matrix.n_models)]
        binned = []
        for i, j in pairs:
            bins = indicators.entropy_binned_correlation(softmax, i, j, args.bins)
            binned.append({"i": i, "j": j, "bins": [
                {"bin": b.bin_index, "size": b.size, "rho": b.rho, "degenerate": b.degenerate,
                 "mean_entropy": b.mean_entropy} for b in bins]})
            makers.append((f"entropy_bins_{i}_{j}.png",
                           lambda p, bins=bins, i=i, j=j: _plotting().plot_entropy_bins(
                               bins, p, title=f"{matrix.model_names[i]} vs {matrix.model_names[j]}")))
        out["entropy_bins"] = binned
    elif args.pair:
        raise UsageError("analyze: --pair needs --softmax")
    return out, _plots(args, makers)


def cmd_simulate(args):
    if args.n == 2:
        matrix = simulator.sample_pair(args.p_sub, args.p_sub, args.rho, args.samples,
                                       seed=args.seed, jobs=args.jobs)
        model = {"kind": "exact_pair", "joint_failure": redundancy.pair_failure_probability(
            args.p_sub, args.p_sub, args.rho)}
    else:
        spec = simulator.CommonShockSpec.calibrate(args.p_sub, args.rho, args.n)
        matrix = simulator.sample_ensemble(spec, args.samples, seed=args.seed, jobs=args.jobs)
        model = {"kind": "common_shock", "theta": spec.theta, "q": spec.q,
                 "all_fail": spec.joint(args.n)}
    values = matrix.values
    out = {
        "p_sub": args.p_sub,
        "rho": args.rho,
        "n": args.n,
        "samples": args.samples,
        "seed": args.seed,
        "model": model,
        "marginals": values.mean(axis=0).tolist(),
        "all_fail_rate": float(values.all(axis=1).mean()),
        "mean_rho": indicators.correlation_report(matrix).mean_rho,
        "k_of_n": {str(k): v for k, v in enumerate(kofn.k_of_n_curve(matrix), start=1)},
    }
    if args.out:
        save_indicator_matrix(matrix, args.out)
        out["written"] = str(args.out)
    return out, []


def _dataset_spec(args):
    return trainer.DatasetSpec(n_classes=args.classes, input_dim=args.input_dim,
                               separation=args.separation, seed=args.data_seed)


def _training_config(args, lam):
    return trainer.TrainingConfig(
        lam=lam, n_members=args.n, hidden_dim=args.hidden, max_epochs=args.max_epochs,
        seed=args.seed, train_fraction=args.train_fraction, view_mode=args.views,
        view_dim=args.view_dim,
    )


def _metrics_dict(m: trainer.EvalMetrics):
    out = asdict(m)
    out["k_of_n"] = {str(k): v for k, v in enumerate(m.k_of_n, start=1)}
    return out


def cmd_train(args):
    dataset = trainer.make_dataset(_dataset_spec(args))
    config = _training_config(args, args.lam)
    result = trainer.train_ensemble(config, dataset)
    test = trainer.evaluate(result.model, dataset.x_test, dataset.y_test, config.lam)
    out = {
        "config": asdict(config),
        "dataset": asdict(dataset.spec),
        "epochs": result.epochs,
        "stop_reason": result.stop_reason,
        "test": _metrics_dict(test),
        "history": [{"epoch": h.epoch, "learning_rate": h.learning_rate, "train_loss": h.train_loss,
                     "val_loss": h.validation.loss, "val_avg_accuracy": h.validation.avg_accuracy,
                     "val_joint_accuracy": h.validation.joint_accuracy,
                     "val_mean_rho": h.validation.mean_rho} for h in result.history],
    }
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        ids = tuple(str(i) for i in range(dataset.y_test.size))
        softmax = result.model.softmax_tensor(dataset.x_test, dataset.y_test)
        softmax = indicators.SoftmaxTensor(softmax.probabilities, softmax.labels,
                                           softmax.model_names, ids)
        save_softmax_tensor(softmax, outdir / "softmax.csv")
        save_indicator_matrix(softmax.indicators(), outdir / "indicators.csv")
        out["written"] = [str(outdir / "softmax.csv"), str(outdir / "indicators.csv")]
    plots = _plots(args, [
        ("training_history.png", lambda p: _plotting().plot_training_history(result.history, p)),
        ("kofn.png", lambda p: _plotting().plot_k_of_n(test.k_of_n, p)),
    ])
    return out, plots


def cmd_sweep(args):
    dataset = trainer.make_dataset(_dataset_spec(args))
    config = _training_config(args, 0.0)
    report = trainer.lambda_sweep(config, dataset, args.grid, args.reps,
                                  master_seed=args.seed, jobs=args.jobs)
    out = report.to_dict()
    out["dataset"] = asdict(dataset.spec)
    out["config"] = {k: v for k, v in asdict(config).items() if k not in ("lam", "seed")}
    if args.out:
        Path(args.out).write_text(report.to_csv(), encoding="utf-8")
        out["written"] = str(args.out)
    return out, _plots(args, [("sweep.png", lambda p: _plotting().plot_sweep(report, p))])


# -- parser ------------------------------------------------------------------

def _global_options(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    d = (lambda key: default if suppress else GLOBAL_DEFAULTS[key])
    parser.add_argument("--format", choices=("json", "text"), default=d("format"),
                        help="report format (default json)")
    parser.add_argument("--paper-mode", action="store_true", default=d("paper_mode"),
                        help="use the published rounding and one-sided quantile conventions")
    parser.add_argument("--jobs", type=_count, default=d("jobs"), help="worker count")
    parser.add_argument("--seed", type=_count, default=d("seed"), help="random seed")
    parser.add_argument("--plot-dir", default=d("plot_dir"),
                        help="write figures (PNG) for the report into this directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evidencekit",
                     description="Statistical evidence for redundant perception systems.")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_options(p, suppress=True)
        p.set_defaults(func=fn)
        return p

    p = add("plan", cmd_plan, "frames and labeling cost needed to certify a perception system")
    p.add_argument("--config", help="key = value assumptions file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="built-in assumption set")
    for name in ASSUMPTION_FLAGS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=_number, default=None,
                       help="override the file value")

    p = add("test", cmd_test, "exact one-sided binomial test and zero-failure sample size")
    p.add_argument("--p-tol", type=_number, required=True)
    p.add_argument("--alpha", type=_number, default=0.05)
    p.add_argument("--samples", type=_count, help="number of test trials")
    p.add_argument("--failures", type=_count, default=0, help="observed failures")

    p = add("redundancy", cmd_redundancy, "sample sizes for n redundant subsystems")
    p.add_argument("--p-tol", type=_number, required=True)
    p.add_argument("--alpha", type=_number, default=0.05)
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--frames", type=_number, help="single-system frame requirement to rescale")
    p.add_argument("--rho", type=_number, help="pairwise error correlation")
    p.add_argument("--p-sub", type=_number, help="subsystem failure probability")

    p = add("corr-ci", cmd_corr_ci, "Fisher-z confidence interval for a correlation")
    p.add_argument("--rho", type=_number, required=True)
    p.add_argument("--samples", type=_count, required=True, help="number of paired samples")
    p.add_argument("--alpha", type=_number, default=0.05)

    p = add("corr-evidence", cmd_corr_evidence,
            "samples needed to bound a correlation by sqrt(p_tol)")
    p.add_argument("--p-tol", type=_number, required=True)
    p.add_argument("--alpha", type=_number, default=0.05)

    p = add("kofn", cmd_kofn, "k-out-of-n reliability, theoretical or from an indicator CSV")
    p.add_argument("--p-sub", type=_number)
    p.add_argument("--n", type=_count)
    p.add_argument("--k", type=_count)
    p.add_argument("--indicators", help="indicator CSV")

    p = add("analyze", cmd_analyze, "error correlations, chi-square tests and entropy bins")
    p.add_argument("--indicators", help="indicator CSV")
    p.add_argument("--softmax", help="softmax CSV")
    p.add_argument("--alpha", type=_number, default=0.05)
    p.add_argument("--bins", type=_count, default=8)
    p.add_argument("--pair", type=_pair, help="restrict entropy bins to models i,j")

    p = add("simulate", cmd_simulate, "sample correlated failure indicators")
    p.add_argument("--p-sub", type=_number, required=True)
    p.add_argument("--rho", type=_number, default=0.0)
    p.add_argument("--n", type=_count, default=2)
    p.add_argument("--samples", type=_count, default=10**6)
    p.add_argument("--out", help="write the indicator CSV here")

    for name, fn, text in (("train", cmd_train, "train one decorrelated ensemble"),
                           ("sweep", cmd_sweep, "train ensembles over a grid of penalty weights")):
        p = add(name, fn, text)
        p.add_argument("--n", type=_count, default=5, help="ensemble members")
        p.add_argument("--hidden", type=_count, default=32)
        p.add_argument("--max-epochs", type=_count, default=60)
        p.add_argument("--train-fraction", type=_number, default=1.0)
        p.add_argument("--views", choices=trainer.VIEW_MODES, default="identity")
        p.add_argument("--view-dim", type=_count, default=None)
        p.add_argument("--classes", type=_count, default=trainer.DatasetSpec.n_classes)
        p.add_argument("--input-dim", type=_count, default=trainer.DatasetSpec.input_dim)
        p.add_argument("--separation", type=_number, default=trainer.DatasetSpec.separation)
        p.add_argument("--data-seed", type=_count, default=0)
        if name == "train":
            p.add_argument("--lambda", dest="lam", type=_number, default=0.0)
            p.add_argument("--out", help="directory for the test-split softmax and indicator CSVs")
        else:
            p.add_argument("--grid", type=_grid, default=[0.0, 0.1, 1.0, 10.0, 100.0])
            p.add_argument("--reps", type=_count, default=10)
            p.add_argument("--out", help="write the per-cell CSV here")
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        for key, value in GLOBAL_DEFAULTS.items():
            if not hasattr(args, key):
                setattr(args, key, value)
        report, plots = args.func(args)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=stderr)
        print(f"error: {exc}", file=stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except FormatError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_IO
    except OSError as exc:
        name = exc.filename if exc.filename is not None else ""
        print(f"error: {name}: {exc.strerror or exc}", file=stderr)
        return EXIT_IO
    except (DomainError, TrainingDivergedError, OverflowError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_DOMAIN
    except EvidenceError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_DOMAIN
    if plots:
        report["plots"] = plots
    stdout.write(render(report, args.format))
    return EXIT_OK
