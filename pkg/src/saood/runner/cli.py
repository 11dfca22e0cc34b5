"""Command-line interface.

Exit codes: 0 success, 2 configuration or data error, 3 numeric failure
(non-finite training values, or a failed ``verify`` check).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .. import datasets
from ..datasets import DataError
from ..gradnet import checkpoint
from . import commands
from .config import ConfigError, load_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def parse_values(text):
    """``a,b,c`` or ``start:stop:count`` (inclusive linspace)."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        start, stop, count = text.split(":")
        return [float(v) for v in np.linspace(float(start), float(stop), int(count))]
    return [float(v) for v in text.split(",") if v.strip()]


def parse_seeds(text):
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi)))
    return [int(v) for v in text.split(",") if v.strip()]


def _overrides(args):
    pairs = []
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    for flag in ("method", "alpha", "epsilon", "seed"):
        value = getattr(args, flag, None)
        if value is not None:
            pairs.append((flag, str(value)))
    if getattr(args, "epochs", None) is not None:
        pairs.append(("train.epochs", str(args.epochs)))
    return pairs


def _config(args):
    cfg = load_config(args.config, _overrides(args))
    if args.out:
        cfg.output_dir = args.out
    return cfg


def build_parser():
    parser = argparse.ArgumentParser(prog="saood", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_seed=True):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        if with_seed:
            p.add_argument("--seed", type=int)
        p.add_argument("--method", choices=["baseline", "sa", "msmi", "mbce"])
        p.add_argument("--alpha", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--epochs", type=int)

    common(sub.add_parser("train", help="train one model and evaluate it"))
    common(sub.add_parser("trend", help="train and record per-epoch confidence trends"))

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--id-test", help="labeled CSV; defaults to the config's ID test set")
    p.add_argument("--ood-test", help="comma-separated unlabeled CSVs; defaults to the config's OOD test sets")

    p = sub.add_parser("sweep", help="grid over epsilon or alpha")
    common(p, with_seed=False)
    p.add_argument("--param", required=True, choices=["epsilon", "alpha"])
    p.add_argument("--values", required=True, help="a,b,c or start:stop:count")
    p.add_argument("--seeds", default="0", help="a,b,c or lo:hi")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("ablate", help="SA vs MSMI vs MBCE")
    common(p, with_seed=False)
    p.add_argument("--seeds", default="0", help="a,b,c or lo:hi")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("verify", help="numerical checks of the bound chain and identities")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for verify.json")
    return parser


def _eval_sets(args, cfg, k):
    from .experiment import build_data

    if args.id_test:
        id_test = datasets.load_csv(args.id_test, has_label=True, k=k)
    else:
        id_test = build_data(cfg).id_test
    if args.ood_test:
        ood = {Path(p).stem: datasets.load_csv(p, has_label=False)
               for p in args.ood_test.split(",") if p.strip()}
    else:
        ood = build_data(cfg).ood_test
    return id_test, ood


def run(args):
    if args.command == "verify":
        report = commands.cmd_verify(args.trials, args.seed, args.out)
        print(report.format())
        return EXIT_OK if report.ok else EXIT_NUMERIC

    cfg = _config(args)
    out = Path(cfg.output_dir)
    if args.command == "train":
        report = commands.cmd_train(cfg, out)
        print(f"acc={report.acc:.4f} auroc_mean={report.auroc_mean:.4f} -> {out}")
    elif args.command == "trend":
        rows = commands.cmd_trend(cfg, out)
        print(f"{len(rows)} trend rows -> {out / 'trend.csv'}")
    elif args.command == "eval":
        k = checkpoint.load(args.checkpoint).layer_sizes[-1]
        id_test, ood = _eval_sets(args, cfg, k)
        report = commands.cmd_eval(args.checkpoint, id_test, ood, out)
        print(f"acc={report.acc:.4f} auroc_mean={report.auroc_mean:.4f} -> {out}")
    elif args.command == "sweep":
        rows = commands.cmd_sweep(cfg, args.param, parse_values(args.values),
                                  parse_seeds(args.seeds), out, args.jobs)
        print(f"{len(rows)} sweep rows -> {out / 'sweep.csv'}")
    elif args.command == "ablate":
        rows = commands.cmd_ablate(cfg, parse_seeds(args.seeds), out, args.jobs)
        print(f"{len(rows)} ablation rows -> {out / 'ablate.csv'}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (ConfigError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FloatingPointError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
