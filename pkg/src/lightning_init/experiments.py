"""Experiment runners behind the CLI subcommands.

Each runner takes an :class:`ExperimentConfig`, writes a run directory and
returns its path. Repeat ``i`` of a run uses seed ``config.seed + i`` for both
the initializer and the minibatch shuffling, so a run directory can be
re-created bit for bit from its manifest.
"""

from __future__ import annotations

import datetime as _dt
import itertools
import logging
import multiprocessing
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    cdf_by_layer,
    compare_parent_child,
    path_curve,
    paths_vs_accuracy_hook,
)
from .config import ExperimentConfig
from .data import fetch_or_load
from .exceptions import ConfigurationError, InputError
from .initializers import InitializerSpec, InitKind, LightningConfig, build_network
from .network import DenseNetwork, ExperimentRecord, TrainConfig, evaluate, train
from .persistence import (
    SCHEMAS,
    read_manifest,
    read_table,
    save_network,
    load_network,
    write_csv,
    write_manifest,
)
from .sparse_graph import categorize_fraction, reinit_from_view

logger = logging.getLogger(__name__)

# datasets shared with forked worker processes
_SHARED: dict = {}


@dataclass
class RunResult:
    label: str
    repeat: int
    seed: int
    records: list[ExperimentRecord]
    net: DenseNetwork

    @property
    def best_accuracy(self) -> float | None:
        accs = [r.val_accuracy for r in self.records if r.val_accuracy is not None]
        return max(accs) if accs else None


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", text).strip("_")


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as pool:
        return list(pool.map(fn, items))


def load_data(cfg: ExperimentConfig):
    train_set, test_set = fetch_or_load(cfg.data.cache_dir, cfg.data.offline)
    return train_set.head(cfg.data.train_limit), test_set.head(cfg.data.test_limit)


def _train_one(job) -> RunResult:
    cfg, spec, repeat = job
    seed = cfg.seed + repeat
    net = build_network(cfg.layer_sizes, spec.with_seed(seed), cfg.activations)
    hooks = [paths_vs_accuracy_hook(cfg.path_k)] if cfg.path_k else []
    records = train(
        net,
        _SHARED["train"],
        replace(cfg.training, rng_seed=seed),
        _SHARED["test"],
        hooks,
    )
    return RunResult(spec.label, repeat, seed, records, net)


def _train_all(cfg: ExperimentConfig, specs, data) -> list[RunResult]:
    _SHARED["train"], _SHARED["test"] = data
    jobs = [(cfg, spec, r) for spec in specs for r in range(cfg.repeats)]
    return _map(_train_one, jobs, cfg.threads)


def _metric_header(path_k) -> list[str]:
    return [
        "initializer", "repeat", "seed", "epoch", "train_loss",
        "train_accuracy", "val_accuracy", "wrong_answer",
    ] + [f"path_fraction_{k}" for k in path_k]


def _metric_rows(results: list[RunResult], path_k):
    for res in results:
        for rec in res.records:
            wrong = None if rec.val_accuracy is None else 1.0 - rec.val_accuracy
            yield [
                res.label, res.repeat, res.seed, rec.epoch, rec.train_loss,
                rec.train_accuracy, rec.val_accuracy, wrong,
            ] + [rec.path_fractions.get(k) for k in path_k]


def _timing_rows(results: list[RunResult]):
    for res in results:
        for rec in res.records:
            yield [res.label, res.repeat, rec.epoch, rec.wall_time_s]


def _prepare(cfg: ExperimentConfig, out) -> Path:
    run_dir = Path(out if out is not None else cfg.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _finish(run_dir: Path, cfg: ExperimentConfig, started: str, artifacts: list[str]):
    manifest = {
        "kind": cfg.kind,
        "config": cfg.to_dict(),
        "seeds": [cfg.seed + r for r in range(cfg.repeats)],
        "artifacts": sorted(artifacts),
        "schemas": {a: SCHEMAS[a] for a in artifacts if a in SCHEMAS},
        "version": __version__,
        "started": started,
        "finished": _now(),
    }
    write_manifest(run_dir, manifest)
    return run_dir


def _write_training(run_dir: Path, results: list[RunResult], path_k, artifacts: list[str]):
    write_csv(run_dir / "metrics.csv", _metric_header(path_k), _metric_rows(results, path_k))
    write_csv(
        run_dir / "timing.csv",
        ["initializer", "repeat", "epoch", "wall_time_s"],
        _timing_rows(results),
    )
    artifacts += ["metrics.csv", "timing.csv"]
    (run_dir / "weights").mkdir(exist_ok=True)
    for res in results:
        name = f"weights/{_slug(res.label)}_r{res.repeat}.npz"
        save_network(run_dir / name, res.net)
        artifacts.append(name)


def run_train(cfg: ExperimentConfig, out=None, data=None) -> Path:
    """Train every initializer ``repeats`` times; write metrics and final weights."""
    started = _now()
    run_dir = _prepare(cfg, out)
    data = data if data is not None else load_data(cfg)
    results = _train_all(cfg, cfg.initializers, data)
    artifacts: list[str] = []
    _write_training(run_dir, results, cfg.path_k, artifacts)
    return _finish(run_dir, cfg, started, artifacts)


def _prune_header(layer_names) -> list[str]:
    names = [_slug(n) for n in layer_names]
    return (
        ["repeat", "active_fraction", "stage"]
        + [f"change_{n}" for n in names]
        + ["change_overall"]
        + [f"pearson_{n}" for n in names]
        + ["pearson_overall", "accuracy", "parent_accuracy"]
    )


def run_prune_reinit(cfg: ExperimentConfig, out=None, data=None) -> Path:
    """Train a parent, rebuild pruned children from its sparse graph, retrain them.

    Writes one ``reinit`` row (child before retraining) and one ``retrained``
    row per active fraction: change rates, Pearson coefficients and accuracy.
    """
    started = _now()
    run_dir = _prepare(cfg, out)
    data = data if data is not None else load_data(cfg)
    _SHARED["train"], _SHARED["test"] = data
    test = data[1]
    spec = cfg.initializers[0]
    pr = cfg.prune_reinit
    child_epochs = pr.child_epochs if pr.child_epochs is not None else cfg.training.epochs

    results: list[RunResult] = []
    rows = []
    header = None
    for repeat in range(cfg.repeats):
        parent = _train_one((cfg, spec, repeat))
        parent = replace(parent, label="parent")
        results.append(parent)
        header = header or _prune_header(parent.net.layer_names)
        for fraction in pr.active_fractions:
            view = categorize_fraction(parent.net, fraction)
            acts = [layer.activation for layer in parent.net.layers]
            child = reinit_from_view(view, pr.magnitude, acts)
            before = compare_parent_child(view, child, evaluate(child, test.images, test.labels))
            child_cfg = replace(cfg.training, epochs=child_epochs, rng_seed=parent.seed)
            records = train(child, data[0], child_cfg, test)
            res = RunResult(f"child@{fraction:g}", repeat, parent.seed, records, child)
            results.append(res)
            after = compare_parent_child(view, child, res.best_accuracy)
            for stage, rep in (("reinit", before), ("retrained", after)):
                rows.append(
                    [repeat, fraction, stage]
                    + rep.change_rates
                    + [rep.overall_change_rate]
                    + rep.pearson
                    + [rep.overall_pearson, rep.child_accuracy, parent.best_accuracy]
                )
            logger.info(
                "fraction %g: change %.4f pearson %s accuracy %s",
                fraction, after.overall_change_rate, after.overall_pearson, after.child_accuracy,
            )
    artifacts = ["prune_reinit.csv"]
    write_csv(run_dir / "prune_reinit.csv", header, rows)
    _write_training(run_dir, results, cfg.path_k, artifacts)
    return _finish(run_dir, cfg, started, artifacts)


def default_grid(n_edges: int, points: int = 50) -> list[int]:
    return sorted({int(round(x)) for x in np.linspace(1, n_edges, points)})


def run_path_curve(cfg: ExperimentConfig, out=None) -> Path:
    """Monte Carlo complete-path fraction vs number of strongest edges kept."""
    started = _now()
    n_edges = cfg.n_edges
    grid = cfg.path_curve.grid or default_grid(n_edges)
    if max(grid) > n_edges or min(grid) < 1:
        raise ConfigurationError(f"path-curve grid must lie in [1, {n_edges}]")
    run_dir = _prepare(cfg, out)
    rows = []
    for spec in cfg.initializers:
        curve = path_curve(
            cfg.layer_sizes, spec.with_seed(cfg.seed), grid, cfg.path_curve.trials, cfg.threads
        )
        for k, ef, m, s in zip(curve.grid, curve.edge_fraction, curve.mean_fraction,
                               curve.std_fraction):
            rows.append([spec.label, k, ef, m, s, curve.trials])
    write_csv(
        run_dir / "path_curve.csv",
        ["initializer", "k", "edge_fraction", "mean_fraction", "std_fraction", "trials"],
        rows,
    )
    return _finish(run_dir, cfg, started, ["path_curve.csv"])


def run_param_study(cfg: ExperimentConfig, out=None, data=None) -> Path:
    """Best validation accuracy over a (lightning count, strength) grid."""
    started = _now()
    run_dir = _prepare(cfg, out)
    data = data if data is not None else load_data(cfg)
    ps = cfg.param_study
    specs = [
        InitializerSpec(InitKind.LIGHTNING, cfg.seed, lightning=LightningConfig(int(n), float(s)))
        for n, s in itertools.product(ps.n_lightnings, ps.strengths)
    ]
    results = _train_all(cfg, specs, data)
    rows = []
    for spec in specs:
        cell = [r for r in results if r.label == spec.label]
        best = float(np.mean([r.best_accuracy for r in cell]))
        final = float(np.mean([r.records[-1].val_accuracy for r in cell])) if cell[0].records else None
        wrong = 1.0 - best
        rows.append([
            spec.lightning.n_lightnings, spec.lightning.strength, len(cell),
            best, final, wrong, min(wrong, ps.wrong_answer_cap),
        ])
    artifacts = ["param_study.csv"]
    write_csv(
        run_dir / "param_study.csv",
        ["n_lightnings", "strength", "repeats", "mean_best_accuracy",
         "mean_final_accuracy", "wrong_answer", "wrong_answer_plot"],
        rows,
    )
    _write_training(run_dir, results, cfg.path_k, artifacts)
    return _finish(run_dir, cfg, started, artifacts)


def _thin(values: np.ndarray, fractions: np.ndarray, max_points: int | None):
    if max_points is None or values.size <= max_points:
        return values, fractions
    idx = np.unique(np.linspace(0, values.size - 1, max_points).round().astype(int))
    return values[idx], fractions[idx]


def run_cdf(cfg: ExperimentConfig, out=None, weights=None, data=None) -> Path:
    """Per-layer CDF of ``|w|``, from a weights file or from freshly trained nets."""
    started = _now()
    weights = weights or cfg.cdf.weights
    artifacts = ["cdf.csv"]
    if weights is not None:
        nets = [("weights", load_network(weights))]
        run_dir = _prepare(cfg, out)
    else:
        run_dir = _prepare(cfg, out)
        data = data if data is not None else load_data(cfg)
        results = _train_all(cfg, cfg.initializers, data)
        _write_training(run_dir, results, cfg.path_k, artifacts)
        nets = [(r.label, r.net) for r in results if r.repeat == 0]
    rows = []
    for label, net in nets:
        for series in cdf_by_layer(net):
            v, f = _thin(series.values, series.fractions, cfg.cdf.max_points_per_layer)
            rows.extend([label, series.layer_name, x, y] for x, y in zip(v, f))
    write_csv(run_dir / "cdf.csv", ["initializer", "layer", "abs_weight", "cumulative_fraction"],
              rows)
    return _finish(run_dir, cfg, started, artifacts)


RUNNERS = {
    "train": run_train,
    "prune-reinit": run_prune_reinit,
    "path-curve": run_path_curve,
    "param-study": run_param_study,
    "cdf": run_cdf,
}


def _write_dat(path: Path, columns: list[str], rows) -> None:
    lines = ["# " + " ".join(columns)]
    for row in rows:
        if row is None:
            lines.append("")
        else:
            lines.append(" ".join(str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _group(rows, key):
    groups: dict = {}
    for row in rows:
        groups.setdefault(row[key], []).append(row)
    return groups


def run_plot(run_dir) -> Path:
    """Turn a run's CSV tables into whitespace-separated plot data plus a manifest.

    Files land in ``<run_dir>/plot``; nothing is rendered.
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ConfigurationError(f"{run_dir} is not a directory")
    manifest = read_manifest(run_dir)
    kind = manifest.get("kind")
    plot_dir = run_dir / "plot"
    plot_dir.mkdir(exist_ok=True)
    series = []

    def add(name, columns, rows, x, y, label):
        _write_dat(plot_dir / name, columns, rows)
        series.append({"file": name, "x": x, "y": y, "label": label})

    if kind in ("train", "param-study", "prune-reinit") or (
        kind == "cdf" and "metrics.csv" in manifest.get("schemas", {})
    ):
        metrics = read_table(run_dir, "metrics.csv")
        for label, rows in _group(metrics, "initializer").items():
            by_epoch = _group(rows, "epoch")
            out_rows = []
            for epoch in sorted(by_epoch, key=int):
                wrong = [float(r["wrong_answer"]) for r in by_epoch[epoch] if r["wrong_answer"]]
                if wrong:
                    out_rows.append([int(epoch), float(np.mean(wrong)), min(wrong), max(wrong)])
            add(f"error_{_slug(label)}.dat", ["epoch", "mean", "min", "max"], out_rows,
                "epoch", "wrong answer probability", label)
    if kind == "path-curve":
        table = read_table(run_dir, "path_curve.csv")
        for label, rows in _group(table, "initializer").items():
            out_rows = [[r["k"], r["edge_fraction"], r["mean_fraction"], r["std_fraction"]]
                        for r in rows]
            add(f"path_{_slug(label)}.dat", ["k", "edge_fraction", "mean", "std"], out_rows,
                "strongest edges kept", "fraction of edges on complete paths", label)
    elif kind == "prune-reinit":
        table = [r for r in read_table(run_dir, "prune_reinit.csv") if r["stage"] == "retrained"]
        out_rows = [[r["active_fraction"], r["change_overall"], r["pearson_overall"],
                     r["accuracy"]] for r in table]
        add("prune_reinit.dat", ["active_fraction", "change", "pearson", "accuracy"], out_rows,
            "active fraction", "changed connections", "retrained child")
    elif kind == "param-study":
        table = read_table(run_dir, "param_study.csv")
        out_rows = []
        for n, rows in _group(table, "n_lightnings").items():
            out_rows.extend([r["n_lightnings"], r["strength"], r["wrong_answer_plot"]]
                            for r in rows)
            out_rows.append(None)
        add("param_study.dat", ["n_lightnings", "strength", "wrong_answer"], out_rows,
            "n_lightnings", "strength", "best wrong answer probability (capped)")
    elif kind == "cdf":
        table = read_table(run_dir, "cdf.csv")
        for label, rows in _group(table, "initializer").items():
            for layer, lrows in _group(rows, "layer").items():
                out_rows = [[r["abs_weight"], r["cumulative_fraction"]] for r in lrows]
                add(f"cdf_{_slug(label)}_{_slug(layer)}.dat", ["abs_weight", "fraction"],
                    out_rows, "|w|", "cumulative fraction", f"{label} {layer}")
    elif kind not in ("train",):
        raise ConfigurationError(f"unknown run kind {kind!r} in {run_dir}")
    if not series:
        raise InputError(f"{run_dir} holds no plottable data")
    write_manifest(plot_dir, {"source_run": str(run_dir), "kind": kind, "series": series})
    return plot_dir
