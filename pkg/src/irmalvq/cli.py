"""Command-line interface: ``irmalvq <command> [options]``.

Settings come from defaults, then an optional flat TOML file (``--config``),
then the ``IRMALVQ_SEED`` environment variable (seed only), then flags.
Exit codes: 0 ok, 2 usage, 3 I/O, 4 invalid data, 5 numerical failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, irma, lvq, report
from .data import Dataset, SplitSpec, gen_two_gaussians, load_csv, standardize, stratified_split
from .errors import DataError, IoError, IrmaError
from .linalg import sym_eig
from .evaluation import PIPELINES, SELECT_STOPPING_RULE, SELECT_TRAIN_BAC, compare_pipelines
from .metrics import balanced_accuracy, confusion_matrix

EXIT_OK, EXIT_USAGE = 0, 2
SEED_ENV = "IRMALVQ_SEED"

DEFAULTS = {
    "seed": 0,
    "out": ".",
    "deterministic": False,
    "jobs": 1,
    # data
    "data": None,
    "format": "canonical",
    "label_column": None,
    "synthetic": None,
    "standardize": True,
    "train_fraction": 0.5,
    # training
    "epochs": 30,
    "step_prototype": 0.1,
    "step_omega": 0.01,
    "step_schedule": "harmonic",
    "step_decay": 1.0,
    "prototypes": 1,
    "mode": lvq.GMLVQ,
    # irma
    "k": 1,
    "max_iter": None,
    "epsilon": 0.05,
    "eigenvalue_mass": None,
    "run_all": False,
    # gen
    "n": 300,
    "output": None,
    # table1
    "repeats": 30,
    "wdbc": None,
    "segmentation": None,
    "prototype_counts": [1, 2, 3],
    "pipelines": list(PIPELINES),
    "selection": SELECT_TRAIN_BAC,
    # project / relevance / plot
    "result": None,
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("common")
    g.add_argument("--config", help="flat TOML file with option values")
    g.add_argument("--seed", type=int, help="root seed (default 0)")
    g.add_argument("--out", help="output directory (default .)")
    g.add_argument("--deterministic", action="store_const", const=True,
                   help="omit timestamps so reruns are byte-identical")
    g.add_argument("--jobs", type=int, help="worker processes for evaluation repeats")


def _data_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("data")
    g.add_argument("--data", nargs="+", help="CSV file(s); several files are merged")
    g.add_argument("--format", choices=["canonical", "wdbc", "segmentation"],
                   help="input layout (default canonical)")
    g.add_argument("--label-column", dest="label_column", help="label column name or 0-based index")
    g.add_argument("--synthetic", type=int, metavar="N",
                   help="use the two-Gaussian generator with N samples per class instead of --data")
    g.add_argument("--no-standardize", dest="standardize", action="store_const", const=False,
                   help="skip z-scoring")
    g.add_argument("--train-fraction", dest="train_fraction", type=float,
                   help="stratified train share; the rest is held out for scoring (1 = score on train)")


def _train_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int)
    g.add_argument("--step-prototype", dest="step_prototype", type=float)
    g.add_argument("--step-omega", dest="step_omega", type=float)
    g.add_argument("--step-schedule", dest="step_schedule", choices=["harmonic", "exponential", "constant"])
    g.add_argument("--step-decay", dest="step_decay", type=float)
    g.add_argument("--prototypes", type=int, help="prototypes per class")


def _irma_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("irma")
    g.add_argument("--k", type=int, help="eigenvectors removed per iteration (default 1)")
    g.add_argument("--max-iter", dest="max_iter", type=int,
                   help="cap on restricted iterations after iteration 0")
    g.add_argument("--epsilon", type=float, help="stop once BAC <= 1/C + epsilon (default 0.05)")
    g.add_argument("--eigenvalue-mass", dest="eigenvalue_mass", type=float,
                   help="harvest the leading vectors carrying this eigenvalue mass instead of --k")
    g.add_argument("--run-all", dest="run_all", action="store_const", const=True,
                   help="do not stop at chance level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irmalvq", description="GLVQ / GMLVQ and iterated relevance matrix analysis")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen", help="write the synthetic two-Gaussian dataset as CSV")
    _common(p)
    p.add_argument("--n", type=int, help="samples per class (default 300)")
    p.add_argument("--output", help="file name inside --out (default synthetic.csv)")

    p = sub.add_parser("train", help="train one GLVQ/GMLVQ model")
    _common(p)
    _data_args(p)
    _train_args(p)
    p.add_argument("--mode", choices=[lvq.GMLVQ, lvq.GLVQ])

    p = sub.add_parser("irma", help="run IRMA and write result, relevances, figures and BAC table")
    _common(p)
    _data_args(p)
    _train_args(p)
    _irma_args(p)

    p = sub.add_parser("table1", help="compare GLVQ in original, GMLVQ and IRMA space")
    _common(p)
    _train_args(p)
    _irma_args(p)
    p.add_argument("--wdbc", help="UCI wdbc.data file")
    p.add_argument("--segmentation", nargs="+", help="UCI segmentation.data / segmentation.test")
    p.add_argument("--synthetic", type=int, metavar="N", help="add the two-Gaussian dataset with N per class")
    p.add_argument("--data", nargs="+", help="extra canonical CSV dataset")
    p.add_argument("--repeats", type=int, help="random 50/50 splits (default 30)")
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--prototype-counts", dest="prototype_counts", type=int, nargs="+")
    p.add_argument("--pipelines", nargs="+", choices=list(PIPELINES))
    p.add_argument("--selection", choices=[SELECT_TRAIN_BAC, SELECT_STOPPING_RULE],
                   help="how the IRMA-space dimension is chosen (default train_bac)")

    p = sub.add_parser("project", help="project data onto a stored IRMA subspace")
    _common(p)
    _data_args(p)
    p.add_argument("--result", help="irma.json from the irma command")
    p.add_argument("--output", help="file name inside --out (default projected.csv)")

    p = sub.add_parser("relevance", help="relevance profiles (CSV and bar charts) of a stored IRMA run")
    _common(p)
    p.add_argument("--result", help="irma.json from the irma command")

    p = sub.add_parser("plot", help="SVG figures of a stored IRMA run")
    _common(p)
    _data_args(p)
    p.add_argument("--result", help="irma.json from the irma command")
    return parser


# ---------------------------------------------------------------- settings

def load_config_file(path) -> dict:
    import tomli

    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except OSError as e:
        raise IoError(f"cannot read config {path}: {e}") from e
    except tomli.TOMLDecodeError as e:
        raise UsageError(f"{path}: {e}") from e
    out = {}
    for key, value in doc.items():
        k = key.replace("-", "_")
        if k not in DEFAULTS:
            raise UsageError(f"{path}: unknown option {key!r}")
        if isinstance(value, dict):
            raise UsageError(f"{path}: option {key!r} must be a plain value (the file is flat)")
        out[k] = value
    return out


def resolve(args: argparse.Namespace, environ=None) -> dict:
    """defaults < config file < seed env override < flags."""
    environ = os.environ if environ is None else environ
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(load_config_file(args.config))
    if environ.get(SEED_ENV):
        try:
            settings["seed"] = int(environ[SEED_ENV])
        except ValueError as e:
            raise UsageError(f"{SEED_ENV} must be an integer") from e
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "config"):
            settings[k] = v
    _validate(settings)
    return settings


def _validate(s: dict):
    def positive(key):
        if s[key] is not None and s[key] < 1:
            raise UsageError(f"--{key.replace('_', '-')} must be >= 1")

    for key in ("n", "jobs", "epochs", "prototypes", "k", "repeats", "synthetic"):
        positive(key)
    if not 0 < s["train_fraction"] <= 1:
        raise UsageError("--train-fraction must lie in (0, 1]")
    if s["max_iter"] is not None and s["max_iter"] < 0:
        raise UsageError("--max-iter must be >= 0")
    if s["epsilon"] < 0:
        raise UsageError("--epsilon must be >= 0")
    if s["seed"] < 0:
        raise UsageError("--seed must be >= 0")
    if isinstance(s["data"], str):
        s["data"] = [s["data"]]
    if isinstance(s["segmentation"], str):
        s["segmentation"] = [s["segmentation"]]


def train_config(s: dict, mode: str = lvq.GMLVQ) -> lvq.TrainConfig:
    try:
        return lvq.TrainConfig(
            epochs=s["epochs"], step_prototype=s["step_prototype"], step_omega=s["step_omega"],
            prototypes_per_class=s["prototypes"], seed=s["seed"], mode=mode,
            step_schedule=s["step_schedule"], step_decay=s["step_decay"],
        )
    except ValueError as e:
        raise UsageError(str(e)) from e


def irma_config(s: dict, validation: Dataset | None = None) -> irma.IrmaConfig:
    try:
        return irma.IrmaConfig(
            vectors_per_iteration=s["k"], max_iterations=s["max_iter"], stop_margin=s["epsilon"],
            train_config=train_config(s), validation=validation,
            eigenvalue_mass=s["eigenvalue_mass"], stop_at_chance=not s["run_all"],
        )
    except ValueError as e:
        raise UsageError(str(e)) from e


def load_dataset(s: dict) -> Dataset:
    if s["synthetic"] is not None:
        d = gen_two_gaussians(s["synthetic"], s["seed"])
    elif s["data"]:
        label = s["label_column"]
        if isinstance(label, str) and label.lstrip("-").isdigit():
            label = int(label)
        d = load_csv(s["data"], label_column=label, schema_hint=s["format"])
    else:
        raise UsageError("give --data FILE or --synthetic N")
    return standardize(d) if s["standardize"] else d


def split(d: Dataset, s: dict):
    """(train, held-out) or (d, None) when the train fraction is 1."""
    if s["train_fraction"] >= 1:
        return d, None
    return stratified_split(d, SplitSpec(s["train_fraction"], s["seed"]))


def out_dir(s: dict) -> Path:
    path = Path(s["out"])
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(f"cannot create output directory {path}: {e}") from e
    return path


def _write(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _json(doc) -> str:
    return json.dumps(doc, indent=1) + "\n"


def _stamp(doc: dict, s: dict) -> dict:
    if not s["deterministic"]:
        doc["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return doc


def _read_result(s: dict) -> irma.IrmaResult:
    if not s["result"]:
        raise UsageError("--result irma.json is required")
    try:
        text = Path(s["result"]).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read {s['result']}: {e}") from e
    try:
        return irma.IrmaResult.from_json(text)
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise DataError(f"{s['result']}: malformed IRMA result ({e})") from e


def _log(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- commands

def cmd_gen(s: dict) -> int:
    d = gen_two_gaussians(s["n"], s["seed"])
    path = out_dir(s) / (s["output"] or "synthetic.csv")
    try:
        d.to_csv(path)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    _log(f"wrote {d.n_samples} samples to {path}")
    return EXIT_OK


def cmd_train(s: dict) -> int:
    d = load_dataset(s)
    train, test = split(d, s)
    model = lvq.train(train, train_config(s, s["mode"]))
    out = out_dir(s)
    _write(out / "model.json", model.to_json() + "\n")
    scores = {"train_bac": balanced_accuracy(confusion_matrix(train.y, model.predict(train.X), d.n_classes))}
    if test is not None:
        cm = confusion_matrix(test.y, model.predict(test.X), d.n_classes)
        scores["test_bac"] = balanced_accuracy(cm)
        scores["test_confusion"] = cm.tolist()
    scores["final_cost"] = model.cost_history[-1] if model.cost_history else None
    _write(out / "train_metrics.json", _json(_stamp(scores, s)))
    _log(" ".join(f"{k}={v:.4f}" for k, v in scores.items() if isinstance(v, float)))
    return EXIT_OK


def cmd_irma(s: dict) -> int:
    d = load_dataset(s)
    train, test = split(d, s)
    result = irma.run_irma(train, irma_config(s, validation=test))
    out = out_dir(s)
    _write(out / "irma.json", result.to_json(timestamp=not s["deterministic"]) + "\n")
    _write(out / "subspace.txt", result.subspace.to_text())
    report.emit_bac_table(result.records, out / "bac.csv")
    write_relevances(result, d.feature_names, out)
    write_figures(result, d, out)
    for r in result.records:
        _log(f"iteration {r.index}: BAC {r.bac:.3f}{' (stop)' if r.terminal else ''}")
    _log(f"subspace dimension {result.subspace.dim}")
    return EXIT_OK


def write_relevances(result: irma.IrmaResult, feature_names, out: Path):
    profiles = [irma.relevance_profile(r.model) for r in result.records]
    iters = [r.index for r in result.records]
    names = list(feature_names) if len(feature_names) == len(profiles[0]) else None
    report.emit_relevance_csv(profiles, out / "relevance.csv", names, iters)
    for it, p in zip(iters, profiles):
        report.emit_relevance_csv([p], out / f"relevance_it{it}.csv", names, [it])
        spec = report.FigureSpec("relevance_bars", f"Relevance profile, iteration {it}",
                                 "feature", "relevance")
        report.emit_bars_svg(p, spec, out / f"relevance_it{it}.svg")


def write_figures(result: irma.IrmaResult, d: Dataset | None, out: Path):
    its = [r.index for r in result.records]
    report.emit_curve_svg(its, result.bacs, report.FigureSpec("bac_curve", "BAC per iteration", "iteration", "BAC"),
                          out / "bac_curve.svg")
    for r in result.records:
        ev = sym_eig(0.5 * (r.model.relevance_matrix + r.model.relevance_matrix.T)).eigenvalues
        spec = report.FigureSpec("eigen_spectrum", f"Eigenvalues of relevance matrix, iteration {r.index}",
                                 "index", "eigenvalue")
        report.emit_curve_svg(np.arange(1, ev.size + 1), ev, spec, out / f"eigen_it{r.index}.svg")
        if d is None or len(d.class_names) > report.MAX_CLASSES:
            continue
        free = r.model.n_features - r.model.frozen_directions.shape[0]
        if free < 2:
            continue
        vecs, _ = irma.harvest_vectors(r.model, 2)
        spec = report.FigureSpec("scatter_2d", f"Projection on leading eigenvectors, iteration {r.index}",
                                 "v1", "v2", tuple(d.class_names))
        report.emit_scatter_svg(d.X @ vecs.T, d.y, spec, out / f"scatter_it{r.index}.svg")


def _table_datasets(s: dict) -> list[tuple[str, Dataset]]:
    sets = []
    if s["wdbc"]:
        sets.append(("wdbc", load_csv(s["wdbc"], schema_hint="wdbc")))
    if s["segmentation"]:
        sets.append(("segmentation", load_csv(s["segmentation"], schema_hint="segmentation")))
    if s["synthetic"] is not None:
        sets.append(("synthetic", gen_two_gaussians(s["synthetic"], s["seed"])))
    if s["data"]:
        sets.append((Path(s["data"][0]).stem, load_csv(s["data"], schema_hint="canonical")))
    if not sets:
        raise UsageError("give at least one of --wdbc, --segmentation, --synthetic, --data")
    return sets


def cmd_table1(s: dict) -> int:
    reports = []
    for name, d in _table_datasets(s):
        _log(f"{name}: {d.n_samples} samples, {d.n_features} features, {d.n_classes} classes")
        reports += compare_pipelines(
            standardize(d), s["repeats"], SplitSpec(s["train_fraction"], s["seed"]),
            tuple(s["prototype_counts"]), tuple(s["pipelines"]), train_config(s), irma_config(s),
            s["jobs"], name, s["selection"],
        )
    out = out_dir(s)
    report.emit_bac_table(reports, out / "table1.csv")
    report.emit_repeats_csv(reports, out / "table1_repeats.csv")
    doc = _stamp({"repeats": s["repeats"], "seed": s["seed"], "table": report.summary_dict(reports)}, s)
    _write(out / "table1.json", _json(doc))
    for r in reports:
        dim = "" if r.dim_mode is None else f", {r.dim_mode}-dim"
        _log(f"{r.dataset:14s} n_p={r.prototypes_per_class} {r.pipeline:12s} {r.mean:.3f} ({r.std:.2f}){dim}")
    return EXIT_OK


def cmd_project(s: dict) -> int:
    result = _read_result(s)
    d = load_dataset(s)
    projected = irma.project(result.subspace, d)
    path = out_dir(s) / (s["output"] or "projected.csv")
    try:
        projected.to_csv(path)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    _log(f"wrote {projected.n_samples} x {projected.n_features} projection to {path}")
    return EXIT_OK


def cmd_relevance(s: dict) -> int:
    result = _read_result(s)
    n = result.records[0].model.n_features
    write_relevances(result, [f"x{j + 1}" for j in range(n)], out_dir(s))
    return EXIT_OK


def cmd_plot(s: dict) -> int:
    result = _read_result(s)
    d = load_dataset(s) if (s["data"] or s["synthetic"] is not None) else None
    write_figures(result, d, out_dir(s))
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen, "train": cmd_train, "irma": cmd_irma, "table1": cmd_table1,
    "project": cmd_project, "relevance": cmd_relevance, "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = resolve(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](settings)
    except UsageError as e:
        parser.error(str(e))
    except IrmaError as e:
        _log(f"error: {e}")
        return e.exit_code
    except OSError as e:
        _log(f"error: {e}")
        return IoError.exit_code


if __name__ == "__main__":
    sys.exit(main())
