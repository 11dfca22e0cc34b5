"""Data assembly, the training loop, and evaluation for one run."""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import datasets, detection, objective
from ..datasets import DataError, LabeledSet, MixSpec, UnlabeledSet
from ..gradnet import NonFiniteError, forward, grad_of_loss, init_params, learning_rate, sgd_step

log = logging.getLogger(__name__)

# Fixed offsets mixed with the master seed; see derive_seed.
SEED_OFFSETS = {"id_train": 1, "id_test": 2, "init": 3, "shuffle": 4, "ood_train": 20, "ood_test": 40}


class TrainingError(FloatingPointError):
    """Training produced a non-finite value."""


def derive_seed(master, offset):
    return int(np.random.SeedSequence([master, offset]).generate_state(1, dtype=np.uint64)[0])


def run_seeds(master):
    return {name: derive_seed(master, off) for name, off in SEED_OFFSETS.items()}


@dataclass
class ExperimentData:
    id_train: LabeledSet
    id_test: LabeledSet
    ood_train: UnlabeledSet
    ood_test: dict

    @property
    def k(self):
        return self.id_train.k


def _split_budget(total, parts):
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _subsample(pool, n, seed):
    if n > len(pool):
        raise DataError(f"need {n} training OOD samples but the pool has only {len(pool)}")
    idx = np.sort(np.random.default_rng(seed).permutation(len(pool))[:n])
    return pool.x[idx]


def build_data(cfg):
    """Materialise ID train/test, the budgeted OOD training set, and OOD test sets."""
    dc = cfg.data
    seeds = run_seeds(cfg.seed)
    eps = 0.0 if cfg.method == "baseline" else cfg.epsilon
    if dc.source == "synthetic":
        id_train = datasets.gen_id_gaussians(dc.k, dc.per_class, dc.d, dc.spread, seeds["id_train"])
        id_test = datasets.gen_id_gaussians(dc.k, dc.test_per_class, dc.d, dc.spread, seeds["id_test"])
    else:
        id_train = datasets.load_csv(dc.id_train_csv, has_label=True)
        id_test = datasets.load_csv(dc.id_test_csv, has_label=True, k=id_train.k)
        if id_test.d != id_train.d:
            raise DataError(f"ID test has d={id_test.d} but ID train has d={id_train.d}")
    id_train.check_complete()

    n_ood = datasets.ood_budget(len(id_train), eps) if eps > 0 else 0
    chunks = []
    if dc.source == "synthetic":
        sources = dc.ood_train
        for kind, share in zip(sources, _split_budget(n_ood, max(len(sources), 1))):
            if share:
                offset = SEED_OFFSETS["ood_train"] + datasets.OOD_KINDS.index(kind)
                chunks.append(datasets.gen_ood(kind, share, dc.d, derive_seed(cfg.seed, offset),
                                               **dc.ood_params.get(kind, {})).x)
        ood_test = {}
        for kind in dc.ood_test:
            offset = SEED_OFFSETS["ood_test"] + datasets.OOD_KINDS.index(kind)
            ood_test[kind] = datasets.gen_ood(kind, dc.ood_test_n, dc.d, derive_seed(cfg.seed, offset),
                                              **dc.ood_params.get(kind, {}))
    else:
        sources = dc.ood_train_csv
        if n_ood and not sources:
            raise DataError("epsilon > 0 but csv.ood_train lists no files")
        for i, (path, share) in enumerate(zip(sources, _split_budget(n_ood, max(len(sources), 1)))):
            pool = datasets.load_csv(path, has_label=False)
            if pool.d != id_train.d:
                raise DataError(f"{path} has d={pool.d} but ID data has d={id_train.d}")
            if share:
                chunks.append(_subsample(pool, share, derive_seed(cfg.seed, SEED_OFFSETS["ood_train"] + i)))
        ood_test = {}
        for path in dc.ood_test_csv:
            ood_test[Path(path).stem] = datasets.load_csv(path, has_label=False)
    ood_train = UnlabeledSet(np.concatenate(chunks) if chunks else np.empty((0, id_train.d)))
    for name, s in ood_test.items():
        if s.d != id_train.d:
            raise DataError(f"OOD test set {name!r} has d={s.d} but ID data has d={id_train.d}")
    return ExperimentData(id_train, id_test, ood_train, ood_test)


def make_objective(method, alpha, prior, msmi_stop_gradient=False):
    """Loss to minimise: ``fn(logits, n_id, labels) -> Tensor`` (negated objective).

    Logits hold the ID rows first and then the OOD rows of one batch.
    """
    beta = alpha / (1.0 - alpha)

    def baseline(logits, n_id, labels):
        return -objective.ce_term(objective.softmax_probs(logits[:n_id]), labels)

    def sa(logits, n_id, labels):
        probs = objective.softmax_probs(logits)
        return -objective.sa_loss(probs[:n_id], labels, probs, prior, alpha)

    def msmi(logits, n_id, labels):
        probs = objective.softmax_probs(logits)
        return -objective.msmi_loss(probs[:n_id], labels, probs, beta, msmi_stop_gradient)

    def mbce(logits, n_id, labels):
        probs = objective.softmax_probs(logits)
        return -objective.mbce_loss(probs[:n_id], labels, probs, prior)

    return {"baseline": baseline, "sa": sa, "msmi": msmi, "mbce": mbce}[method]


@dataclass
class TrainResult:
    params: object
    losses: list = field(default_factory=list)
    samples: int = 0
    seconds: float = 0.0
    epochs: int = 0

    @property
    def throughput(self):
        if self.samples == 0 or self.seconds <= 0:
            return None
        return detection.throughput(self.samples, self.seconds)


def train(cfg, data, on_step=None, on_epoch=None):
    """Run the configured objective with SGD.

    ``on_step(step, params_before, batch, loss)`` and ``on_epoch(epoch, params)``
    are optional hooks. Only forward, loss, backward and the update are timed.
    """
    tc = cfg.train
    seeds = run_seeds(cfg.seed)
    sizes = tc.layer_sizes(data.id_train.d, data.k)
    params = init_params(sizes, seeds["init"])
    prior = objective.class_prior(data.id_train.y, data.k)
    loss_fn = make_objective(cfg.method, cfg.alpha, prior, cfg.msmi_stop_gradient)
    eps = 0.0 if cfg.method == "baseline" else cfg.epsilon
    spec = MixSpec(eps, tc.batch_size, seeds["shuffle"])
    result = TrainResult(params)
    state = None
    step = 0
    for epoch in range(tc.epochs):
        lr = learning_rate(epoch, tc.lr0, tc.lr_decay_epochs, tc.lr_decay_factor)
        for b, batch in enumerate(datasets.make_batches(data.id_train, data.ood_train, spec, epoch)):
            n_id, labels = len(batch.id_y), batch.id_y
            started = time.perf_counter()
            try:
                loss, grads = grad_of_loss(params, lambda z: loss_fn(z, n_id, labels), batch.x)
            except NonFiniteError as exc:
                raise TrainingError(f"epoch {epoch}, batch {b}: {exc}") from exc
            new_params, state = sgd_step(params, grads, lr, state, tc.momentum, tc.weight_decay)
            result.seconds += time.perf_counter() - started
            result.samples += len(batch.x)
            if on_step is not None:
                on_step(step, params, batch, loss)
            params = new_params
            result.losses.append(loss)
            step += 1
        if not params.is_finite():
            raise TrainingError(f"epoch {epoch}: parameters became non-finite")
        result.epochs = epoch + 1
        if on_epoch is not None:
            on_epoch(epoch, params)
    result.params = params
    return result


def _predict(params, x, what):
    logits, feats = forward(params, x)
    if not np.isfinite(logits).all():
        raise NonFiniteError("evaluation", f"logits on {what}")
    return objective.softmax_probs(logits), feats


@dataclass
class Evaluation:
    acc: float
    auroc: dict
    auroc_mean: float
    id_probs: np.ndarray
    id_features: np.ndarray
    ood_probs: dict
    ood_features: dict
    roc: dict


def evaluate(params, id_test, ood_test):
    """ACC on the ID test set and max-softmax AUROC against each OOD test set."""
    if len(id_test) == 0:
        raise DataError("empty ID test set")
    d = params.layer_sizes[0]
    if id_test.d != d:
        raise DataError(f"checkpoint expects d={d} features but the ID test set has d={id_test.d}")
    if id_test.k and params.layer_sizes[-1] < id_test.k:
        raise DataError(f"checkpoint has K={params.layer_sizes[-1]} outputs but labels need K={id_test.k}")
    id_probs, feats = _predict(params, id_test.x, "the ID test set")
    id_conf = detection.max_softmax(id_probs)
    aurocs, rocs, o_probs, o_feats = {}, {}, {}, {}
    for name, s in ood_test.items():
        if len(s) == 0:
            raise DataError(f"OOD test set {name!r} is empty")
        if s.d != d:
            raise DataError(f"checkpoint expects d={d} features but OOD set {name!r} has d={s.d}")
        probs, ft = _predict(params, s.x, f"OOD set {name!r}")
        scores = detection.ScoreSet(id_conf, detection.max_softmax(probs))
        aurocs[name] = detection.auroc(scores)
        rocs[name] = detection.roc_points(scores)
        o_probs[name], o_feats[name] = probs, ft
    if not aurocs:
        raise DataError("no OOD test sets")
    return Evaluation(
        acc=detection.accuracy(id_probs, id_test.y),
        auroc=aurocs,
        auroc_mean=float(np.mean(list(aurocs.values()))),
        id_probs=id_probs,
        id_features=feats,
        ood_probs=o_probs,
        ood_features=o_feats,
        roc=rocs,
    )


def confidence_trend(params, id_test, ood_test):
    """Mean max-softmax confidence for correct ID, wrong ID, and each OOD set."""
    probs, _ = _predict(params, id_test.x, "the ID test set")
    conf = probs.max(axis=1)
    correct = probs.argmax(axis=1) == id_test.y
    row = {
        "Correct": float(conf[correct].mean()) if correct.any() else float("nan"),
        "Wrong": float(conf[~correct].mean()) if (~correct).any() else float("nan"),
    }
    for name, s in ood_test.items():
        row[name] = float(_predict(params, s.x, f"OOD set {name!r}")[0].max(axis=1).mean())
    return row


def warn_ignored_epsilon(cfg):
    if cfg.method == "baseline" and cfg.epsilon != 0:
        warnings.warn("method=baseline trains on ID data only; epsilon is ignored", stacklevel=2)
