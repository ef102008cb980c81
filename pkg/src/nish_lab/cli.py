"""Command-line front end: `nish-lab <command> [--config PATH] [--out DIR]`.

Commands: plot-activations, grad-check, train, depth-sweep, noise-sweep,
stats. Configuration is TOML with [dataset], [model], [optimizer] and
[experiment] sections; unknown keys are hard errors. Results are written
as metrics.csv + summary.json (+ optional plot.svg).

Exit codes: 0 success, 1 experiment failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__, harness, svg
from .activations import ActivationKind, STANDARD_KINDS
from .errors import (
    ConfigError,
    FormatError,
    NishLabError,
    UsageError,
)
from .harness import ExperimentConfig, OptimizerConfig
from .tensor_nn import gradient_check, gradient_check_input, init_params

EXIT_OK = 0
EXIT_EXPERIMENT = 1
EXIT_USAGE = 2

DEFAULT_KINDS = ("relu", "silu", "mish", "nish")

_SECTION_KEYS = {
    "dataset": {"data_dir", "subset", "train_fraction", "noise_sigma",
                "noise_seed", "sigmas"},
    "model": {"architecture", "depth", "depths", "activation", "activations",
              "slope", "rho", "lower", "upper", "cap", "alpha", "beta",
              "beta_trainable"},
    "optimizer": {"kind", "learning_rate", "momentum", "beta1", "beta2",
                  "epsilon"},
    "experiment": {"name", "batch_size", "epochs", "n_runs", "base_seed",
                   "plot"},
}

_KIND_PARAM_KEYS = ("slope", "rho", "lower", "upper", "cap", "alpha", "beta",
                    "beta_trainable")


def _make_kind(tag: str, model: dict) -> ActivationKind:
    if tag not in STANDARD_KINDS:
        raise ConfigError(f"unknown activation {tag!r}")
    overrides = {k: model[k] for k in _KIND_PARAM_KEYS if k in model}
    return ActivationKind(tag, **overrides)


def load_config(path) -> dict:
    """Parse and validate the TOML (or summary.json snapshot) config."""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        raw = payload.get("config", payload)
    else:
        try:
            raw = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    for section, table in raw.items():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(table, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        for key in table:
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    return raw


def resolve_config(raw: dict, seed_override=None):
    """Fill every default, returning (ExperimentConfig, extras dict).

    ``extras`` carries list-valued sweep settings (depths, sigmas,
    activations) and the plot flag.
    """
    dataset = raw.get("dataset", {})
    model = raw.get("model", {})
    optimizer = raw.get("optimizer", {})
    experiment = raw.get("experiment", {})

    opt = OptimizerConfig(
        kind=optimizer.get("kind", "sgd"),
        learning_rate=optimizer.get("learning_rate",
                                    0.1 if optimizer.get("kind", "sgd") == "sgd"
                                    else 1e-3),
        momentum=optimizer.get("momentum", 0.0),
        beta1=optimizer.get("beta1", 0.9),
        beta2=optimizer.get("beta2", 0.999),
        epsilon=optimizer.get("epsilon", 1e-8),
    )
    kind = _make_kind(model.get("activation", "nish"), model)
    base_seed = experiment.get("base_seed", 0)
    if seed_override is not None:
        base_seed = seed_override
    data_dir = dataset.get("data_dir",
                           os.environ.get("NISH_LAB_DATA", "data"))
    config = ExperimentConfig(
        name=experiment.get("name", "train"),
        architecture=model.get("architecture", "mlp"),
        depth=model.get("depth", 3),
        activation=kind,
        optimizer=opt,
        batch_size=experiment.get("batch_size", 128),
        epochs=experiment.get("epochs", 5),
        n_runs=experiment.get("n_runs", 1),
        base_seed=base_seed,
        data_dir=str(data_dir),
        # subset <= 0 means "use the whole training split"
        subset=(lambda s: None if s is not None and s <= 0 else s)(
            dataset.get("subset", 10000)),
        train_fraction=dataset.get("train_fraction", 0.85),
        noise_sigma=dataset.get("noise_sigma", 0.0),
        noise_seed=dataset.get("noise_seed"),
    )
    extras = {
        "depths": model.get("depths", list(range(3, 16))),
        "sigmas": dataset.get("sigmas",
                              [round(0.1 * i, 1) for i in range(11)]),
        "activations": [
            _make_kind(tag, model)
            for tag in model.get("activations", list(DEFAULT_KINDS))
        ],
        "plot": experiment.get("plot", True),
    }
    return config, extras


def config_snapshot(config: ExperimentConfig, extras: dict) -> dict:
    """Fully-resolved config in the TOML section layout; feeding this
    back through `--config summary.json` reproduces the run."""
    kind = config.activation
    return {
        "dataset": {
            "data_dir": config.data_dir,
            "subset": config.subset,
            "train_fraction": config.train_fraction,
            "noise_sigma": config.noise_sigma,
            **({"noise_seed": config.noise_seed}
               if config.noise_seed is not None else {}),
            "sigmas": extras["sigmas"],
        },
        "model": {
            "architecture": config.architecture,
            "depth": config.depth,
            "depths": extras["depths"],
            "activation": kind.tag,
            "activations": [k.tag for k in extras["activations"]],
            "slope": kind.slope, "rho": kind.rho, "lower": kind.lower,
            "upper": kind.upper, "cap": kind.cap, "alpha": kind.alpha,
            "beta": kind.beta, "beta_trainable": kind.beta_trainable,
        },
        "optimizer": {k: v for k, v in asdict(config.optimizer).items()},
        "experiment": {
            "name": config.name,
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "n_runs": config.n_runs,
            "base_seed": config.base_seed,
            "plot": extras["plot"],
        },
    }


def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_metrics_csv(rows, path):
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=harness.CSV_FIELDS,
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_value(row[k]) for k in harness.CSV_FIELDS})


def read_metrics_csv(path):
    rows = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            rows.append({
                "experiment": row["experiment"],
                "activation": row["activation"],
                "depth": int(row["depth"]),
                "sigma": float(row["sigma"]),
                "run": int(row["run"]),
                "epoch": int(row["epoch"]),
                "train_loss": float(row["train_loss"]),
                "test_loss": float(row["test_loss"]),
                "test_acc": float(row["test_acc"]),
                "seed": int(row["seed"]),
            })
    return rows


def write_summary_json(path, config, extras, summary=None, cells=None):
    payload = {
        "tool": "nish-lab",
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config": config_snapshot(config, extras),
    }
    if summary is not None:
        payload["summary"] = asdict(summary)
    if cells is not None:
        payload["cells"] = cells
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


class _Artifacts:
    """Tracks emitted files so partial outputs can be removed on failure."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.created = []

    def path(self, name):
        p = self.out_dir / name
        self.created.append(p)
        return p

    def cleanup(self):
        for p in self.created:
            p.unlink(missing_ok=True)


# ---------------------------------------------------------------------------
# Commands


def cmd_plot_activations(args):
    kinds = [_make_kind(tag, {}) for tag in (args.kinds or DEFAULT_KINDS)]
    out = Path(args.out) / "activations.svg"
    Path(args.out).mkdir(parents=True, exist_ok=True)
    svg.plot_activations(kinds, (args.x_min, args.x_max), out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_grad_check(args):
    if args.config:
        raw = load_config(args.config)
        _, extras = resolve_config(raw, args.seed)
        kinds = extras["activations"]
    else:
        kinds = [STANDARD_KINDS[t] for t in sorted(STANDARD_KINDS)]
    if args.nish_derivative == "literal":
        kinds = list(kinds) + [ActivationKind("nish_literal")]
    x, labels = gradient_check_input(seed=args.seed or 0)
    tol = 1e-4
    failed = []
    for kind in kinds:
        spec = harness.NetworkSpec((
            harness.Dense(784, 32), harness.BatchNorm(32),
            harness.Activation(kind), harness.Dense(32, 10),
        ))
        params, state = init_params(spec, np.random.default_rng(1))
        disc = gradient_check(spec, params, state, x, labels)
        status = "ok" if disc <= tol else "FAIL"
        print(f"{kind.tag:<14} max relative discrepancy {disc:.3e}  {status}")
        if disc > tol:
            failed.append((kind.tag, disc))
    if failed:
        names = ", ".join(f"{t} ({d:.3e})" for t, d in failed)
        print(f"gradient check failed for: {names}", file=sys.stderr)
        return EXIT_EXPERIMENT
    return EXIT_OK


def _final_rows(rows):
    """Last finite epoch per (experiment, activation, depth, sigma, run)."""
    best = {}
    for row in rows:
        if math.isnan(row["test_acc"]):
            continue
        key = (row["experiment"], row["activation"], row["depth"],
               row["sigma"], row["run"])
        if key not in best or row["epoch"] > best[key]["epoch"]:
            best[key] = row
    return best


def cmd_train(args):
    raw = load_config(args.config)
    config, extras = resolve_config(raw, args.seed)
    artifacts = _Artifacts(args.out)
    try:
        summary, all_metrics = harness.multi_run(config)
        rows = []
        for i, m in enumerate(all_metrics):
            rows += harness.metrics_rows(config.name, config.activation.tag,
                                         config.depth, config.noise_sigma, i, m)
        write_metrics_csv(rows, artifacts.path("metrics.csv"))
        write_summary_json(artifacts.path("summary.json"), config, extras,
                           summary=summary)
        if extras["plot"]:
            series = {}
            for i, m in enumerate(all_metrics):
                if m.test_acc:
                    series[f"run {i}"] = (list(range(len(m.test_acc))),
                                          m.test_acc)
            if series:
                svg.plot_sweep(series, f"{config.name}: test accuracy",
                               "epoch", "test accuracy",
                               artifacts.path("plot.svg"))
        print(f"mu_acc={summary.mu_acc:.4f} mu_loss={summary.mu_loss:.4f} "
              f"sigma_acc={summary.sigma_acc}")
        return EXIT_OK
    except Exception:
        artifacts.cleanup()
        raise


def _sweep_command(args, kind):
    raw = load_config(args.config)
    config, extras = resolve_config(raw, args.seed)
    artifacts = _Artifacts(args.out)
    try:
        if kind == "depth":
            rows = harness.depth_sweep(config, extras["depths"],
                                       extras["activations"])
            x_field, y_field = "depth", "test_acc"
            title = "final test accuracy vs depth"
        else:
            arch = config.architecture if config.architecture != "mlp" else "cnn5"
            rows = harness.noise_sweep(config, extras["sigmas"], arch,
                                       extras["activations"])
            x_field, y_field = "sigma", "test_loss"
            title = f"final test loss vs noise sigma ({arch})"
        write_metrics_csv(rows, artifacts.path("metrics.csv"))
        finals = _final_rows(rows)
        cells = [
            {"activation": k[1], "depth": k[2], "sigma": k[3], "run": k[4],
             "test_acc": r["test_acc"], "test_loss": r["test_loss"]}
            for k, r in sorted(finals.items())
        ]
        write_summary_json(artifacts.path("summary.json"), config, extras,
                           cells=cells)
        if extras["plot"]:
            series = {}
            for key, row in sorted(finals.items()):
                xs, ys = series.setdefault(key[1], ([], []))
                xs.append(row[x_field])
                ys.append(row[y_field])
            svg.plot_sweep(series, title, x_field, y_field,
                           artifacts.path("plot.svg"))
        print(f"wrote {len(rows)} rows to {artifacts.out_dir / 'metrics.csv'}")
        return EXIT_OK
    except Exception:
        artifacts.cleanup()
        raise


def cmd_stats(args):
    rows = []
    for path in args.runs:
        p = Path(path)
        if p.is_dir():
            for f in sorted(p.rglob("metrics.csv")):
                rows += read_metrics_csv(f)
        else:
            rows += read_metrics_csv(p)
    if not rows:
        raise UsageError("no metric rows found")
    finals = _final_rows(rows)
    groups: dict[tuple, list] = {}
    for key, row in finals.items():
        groups.setdefault(key[:4], []).append(row)
    out_rows = []
    print(f"{'experiment':<22}{'activation':<12}{'depth':>6}{'sigma':>7}"
          f"{'epochs':>7}{'runs':>5}  {'mu_acc':>8}  {'mu_loss':>8}  {'sigma_acc':>9}")
    for key in sorted(groups):
        rs = groups[key]
        summary = harness.summarize([r["test_acc"] for r in rs],
                                    [r["test_loss"] for r in rs])
        epochs = max(r["epoch"] for r in rs) + 1
        sig = f"{summary.sigma_acc:.4f}" if summary.sigma_acc is not None else "-"
        print(f"{key[0]:<22}{key[1]:<12}{key[2]:>6}{key[3]:>7.2f}"
              f"{epochs:>7}{summary.n_runs:>5}  {100 * summary.mu_acc:7.2f}%"
              f"  {summary.mu_loss:8.4f}  {sig:>9}")
        out_rows.append({
            "experiment": key[0], "activation": key[1], "depth": key[2],
            "sigma": key[3], "epochs": epochs, "n_runs": summary.n_runs,
            "mu_acc": summary.mu_acc, "mu_loss": summary.mu_loss,
            "sigma_acc": summary.sigma_acc,
        })
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "stats.csv", "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(out_rows[0]),
                                    lineterminator="\n")
            writer.writeheader()
            for row in out_rows:
                writer.writerow({k: _csv_value(v) if v is not None else ""
                                 for k, v in row.items()})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nish-lab",
        description="Activation-function laboratory and experiment harness",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plot-activations",
                       help="two-panel SVG of activations and derivatives")
    p.add_argument("--kinds", nargs="*", default=None)
    p.add_argument("--x-min", type=float, default=-6.0)
    p.add_argument("--x-max", type=float, default=6.0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_plot_activations)

    p = sub.add_parser("grad-check",
                       help="finite-difference check of every activation")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--nish-derivative", choices=("corrected", "literal"),
                   default="corrected",
                   help="'literal' adds the known-bad printed derivative "
                        "as a negative control")
    p.set_defaults(func=cmd_grad_check)

    for name, func in (("train", cmd_train),):
        p = sub.add_parser(name, help="train per the config and emit artifacts")
        p.add_argument("--config", required=True)
        p.add_argument("--out", default="results")
        p.add_argument("--seed", type=int, default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("depth-sweep", help="MLP depth sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=lambda a: _sweep_command(a, "depth"))

    p = sub.add_parser("noise-sweep", help="CNN Gaussian-noise sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=lambda a: _sweep_command(a, "noise"))

    p = sub.add_parser("stats", help="aggregate run CSVs into a summary grid")
    p.add_argument("runs", nargs="+",
                   help="metrics.csv files or directories containing them")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, 0 on --help/--version
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, UsageError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NishLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXPERIMENT


if __name__ == "__main__":
    sys.exit(main())
