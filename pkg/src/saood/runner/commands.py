"""train / eval / sweep / ablate / trend / verify."""

from __future__ import annotations

import copy
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import detection, oracle
from ..gradnet import checkpoint
from .artifacts import atomic_write, write_csv, write_json, write_matrix_csv
from .config import ConfigError
from .experiment import (
    build_data,
    confidence_trend,
    evaluate,
    run_seeds,
    train,
    warn_ignored_epsilon,
)

log = logging.getLogger(__name__)

REPORT_FILE = "report.json"
TIMING_FILE = "timing.json"
CHECKPOINT_FILE = "model.ckpt"


@dataclass
class EvalReport:
    acc: float
    auroc_per_ood_set: dict
    auroc_mean: float
    throughput: float | None = None
    config: dict = field(default_factory=dict)
    seed: int | None = None
    epochs: int = 0
    extra: dict = field(default_factory=dict)

    def to_json(self):
        """Reproducible part of the report; wall-clock values live in timing.json."""
        out = {
            "acc": self.acc,
            "auroc": dict(self.auroc_per_ood_set),
            "auroc_mean": self.auroc_mean,
            "config": self.config,
            "epochs": self.epochs,
            "seed": self.seed,
        }
        out.update(self.extra)
        return out


def _config_echo(cfg):
    echo = cfg.to_dict()
    echo.pop("output_dir", None)
    return echo


def _write_eval_artifacts(out, ev, id_labels):
    for name, curve in ev.roc.items():
        atomic_write(out / f"roc_{name}.csv", detection.roc_csv(curve))
    blocks = [("id", ev.id_probs, id_labels)] + [(n, p, None) for n, p in ev.ood_probs.items()]
    write_matrix_csv(out / "probs.csv", "p", blocks)
    blocks = [("id", ev.id_features, id_labels)] + [(n, f, None) for n, f in ev.ood_features.items()]
    write_matrix_csv(out / "features.csv", "h", blocks)


def _trend_header(data):
    return ["epoch", "Correct", "Wrong"] + list(data.ood_test)


def run_experiment(cfg, out=None, artifacts=True, trend=True):
    """Train one configuration, evaluate it, and (optionally) write every result file."""
    warn_ignored_epsilon(cfg)
    data = build_data(cfg)
    trend_rows = []

    def on_epoch(epoch, params):
        if trend and (epoch + 1) % cfg.trend_every == 0:
            row = confidence_trend(params, data.id_test, data.ood_test)
            trend_rows.append([epoch + 1] + list(row.values()))

    result = train(cfg, data, on_epoch=on_epoch)
    ev = evaluate(result.params, data.id_test, data.ood_test)
    report = EvalReport(
        acc=ev.acc,
        auroc_per_ood_set=ev.auroc,
        auroc_mean=ev.auroc_mean,
        throughput=result.throughput,
        config=_config_echo(cfg),
        seed=cfg.seed,
        epochs=result.epochs,
        extra={
            "method": cfg.method,
            "n_train_id": len(data.id_train),
            "n_train_ood": len(data.ood_train),
            "derived_seeds": run_seeds(cfg.seed),
        },
    )
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / REPORT_FILE, report.to_json())
        write_json(out / TIMING_FILE, {
            "throughput": report.throughput,
            "train_seconds": result.seconds,
            "train_samples": result.samples,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        })
        if artifacts:
            checkpoint.save(out / CHECKPOINT_FILE, result.params)
            _write_eval_artifacts(out, ev, data.id_test.y)
        if trend:
            write_csv(out / "trend.csv", _trend_header(data), trend_rows)
    return report, result, trend_rows


def cmd_train(cfg, out):
    report, _, _ = run_experiment(cfg, out)
    return report


def cmd_trend(cfg, out):
    _, _, rows = run_experiment(cfg, out, artifacts=False, trend=True)
    return rows


def cmd_eval(checkpoint_path, id_test, ood_test, out):
    """Evaluate a saved model on an ID test set and named OOD test sets."""
    params = checkpoint.load(checkpoint_path)
    ev = evaluate(params, id_test, ood_test)
    report = EvalReport(
        acc=ev.acc,
        auroc_per_ood_set=ev.auroc,
        auroc_mean=ev.auroc_mean,
        extra={"checkpoint_layer_sizes": params.layer_sizes},
    )
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / REPORT_FILE, report.to_json())
    _write_eval_artifacts(out, ev, id_test.y)
    return report


_PARAM_RANGE = {"epsilon": (0.0, 1.0), "alpha": (0.0, 1.0)}


def _cell(args):
    cfg, out = args
    report, _, _ = run_experiment(cfg, out, artifacts=False, trend=False)
    return report


def _run_cells(cells, jobs):
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_cell, cells))
    return [_cell(c) for c in cells]


def _value_tag(value):
    return f"{value:.9g}"


def cmd_sweep(cfg, param, values, seeds, out, jobs=1):
    """One run per (value, seed); writes sweep.csv."""
    if param not in _PARAM_RANGE:
        raise ConfigError(f"sweep parameter must be one of {sorted(_PARAM_RANGE)}, got {param!r}")
    if not values:
        raise ConfigError("sweep grid is empty")
    if not seeds:
        raise ConfigError("no seeds given")
    lo, hi = _PARAM_RANGE[param]
    for v in values:
        if not lo <= v < hi:
            raise ConfigError(f"{param}={v} outside [{lo}, {hi})")
    out = Path(out)
    cells, keys = [], []
    for v in values:
        for s in seeds:
            c = copy.deepcopy(cfg)
            setattr(c, param, float(v))
            c.seed = int(s)
            cells.append((c, out / "cells" / f"{param}={_value_tag(v)}" / f"seed={s}"))
            keys.append((v, s))
    reports = _run_cells(cells, jobs)
    names = list(reports[0].auroc_per_ood_set)
    header = [param, "seed", "acc"] + [f"auroc_{n}" for n in names] + ["auroc_mean"]
    rows = [[_value_tag(v), str(s), r.acc] + [r.auroc_per_ood_set[n] for n in names] + [r.auroc_mean]
            for (v, s), r in zip(keys, reports)]
    write_csv(out / "sweep.csv", header, rows)
    return rows


ABLATION_METHODS = ("sa", "msmi", "mbce")


def cmd_ablate(cfg, seeds, out, jobs=1):
    """SA, MSMI (beta = alpha / (1 - alpha)) and MBCE on shared data; writes ablate.csv."""
    if not seeds:
        raise ConfigError("no seeds given")
    out = Path(out)
    cells, keys = [], []
    for method in ABLATION_METHODS:
        for s in seeds:
            c = copy.deepcopy(cfg)
            c.method = method
            c.seed = int(s)
            cells.append((c, out / "cells" / method / f"seed={s}"))
            keys.append((method, s))
    reports = _run_cells(cells, jobs)
    names = list(reports[0].auroc_per_ood_set)
    header = ["method", "seed", "acc", "auroc_mean"] + [f"auroc_{n}" for n in names]
    rows = [[m, str(s), r.acc, r.auroc_mean] + [r.auroc_per_ood_set[n] for n in names]
            for (m, s), r in zip(keys, reports)]
    write_csv(out / "ablate.csv", header, rows)
    return rows


def cmd_verify(trials, seed, out=None):
    report = oracle.verify_bound_chain(trials, seed).merge(oracle.verify_identities(trials, seed))
    if out is not None:
        write_json(Path(out) / "verify.json", report.to_dict())
    return report


def summarize(rows, key_index, value_index):
    """Mean of one numeric column grouped by another (used for seed averages)."""
    groups = {}
    for row in rows:
        groups.setdefault(row[key_index], []).append(float(row[value_index]))
    return {k: float(np.mean(v)) for k, v in groups.items()}
