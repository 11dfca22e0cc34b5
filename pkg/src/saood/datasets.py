"""Synthetic generators, CSV ingestion, and mixture batching."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

ID_RADIUS = 3.0
OOD_KINDS = ("ring", "uniform_noise", "gaussian_noise", "shifted_blob")


class DataError(ValueError):
    """Malformed or inconsistent dataset input."""


@dataclass
class LabeledSet:
    x: np.ndarray
    y: np.ndarray
    k: int

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.ndim != 2 or self.y.shape != (len(self.x),):
            raise DataError(f"features {self.x.shape} and labels {self.y.shape} do not align")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= self.k):
            raise DataError(f"labels must lie in [0, {self.k})")

    def __len__(self):
        return len(self.x)

    @property
    def d(self):
        return self.x.shape[1]

    def check_complete(self):
        """Raise unless every class occurs (needed to form a class prior)."""
        counts = np.bincount(self.y, minlength=self.k)
        if (counts == 0).any():
            raise DataError(f"classes {np.flatnonzero(counts == 0).tolist()} have no samples")


@dataclass
class UnlabeledSet:
    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim != 2:
            raise DataError(f"features must be 2-D, got {self.x.shape}")

    def __len__(self):
        return len(self.x)

    @property
    def d(self):
        return self.x.shape[1]


@dataclass(frozen=True)
class MixSpec:
    epsilon: float
    batch_size: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")


@dataclass
class MixBatch:
    id_x: np.ndarray
    id_y: np.ndarray
    ood_x: np.ndarray
    id_index: np.ndarray

    @property
    def x(self):
        """ID rows followed by OOD rows, the order the losses expect."""
        return np.concatenate([self.id_x, self.ood_x]) if len(self.ood_x) else self.id_x


def class_centers(k, d, radius=ID_RADIUS):
    """K centres evenly spaced on a circle in the first two coordinates."""
    angles = 2.0 * np.pi * np.arange(k) / k
    centers = np.zeros((k, d))
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    return centers


def gen_id_gaussians(k, per_class, d, spread, seed):
    if k < 2 or d < 2 or per_class < 1:
        raise ValueError(f"need K >= 2, d >= 2, per_class >= 1 (got {k}, {d}, {per_class})")
    if spread < 0:
        raise ValueError("spread must be non-negative")
    rng = np.random.default_rng(seed)
    centers = class_centers(k, d)
    y = np.repeat(np.arange(k), per_class)
    x = centers[y] + spread * rng.standard_normal((k * per_class, d))
    return LabeledSet(x, y, k)


def gen_ood(kind, n, d, seed, **params):
    """Label-free samples of one of the OOD families in ``OOD_KINDS``.

    ring: ``r_lo``/``r_hi`` (default 5, 7), uniform direction.
    uniform_noise: ``lo``/``hi`` per coordinate (default -7, 7).
    gaussian_noise: standard normal.
    shifted_blob: Gaussian at ``radius`` (6) and ``angle`` (pi/4) in the first
    two coordinates, with standard deviation ``spread`` (0.5).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    if kind == "ring":
        r_lo, r_hi = params.get("r_lo", 5.0), params.get("r_hi", 7.0)
        direction = rng.standard_normal((n, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = rng.uniform(r_lo, r_hi, size=(n, 1))
        x = radius * direction
    elif kind == "uniform_noise":
        x = rng.uniform(params.get("lo", -7.0), params.get("hi", 7.0), size=(n, d))
    elif kind == "gaussian_noise":
        x = rng.standard_normal((n, d))
    elif kind == "shifted_blob":
        radius = params.get("radius", 6.0)
        angle = params.get("angle", math.pi / 4)
        center = np.zeros(d)
        center[0], center[1] = radius * math.cos(angle), radius * math.sin(angle)
        x = center + params.get("spread", 0.5) * rng.standard_normal((n, d))
    else:
        raise ValueError(f"unknown OOD kind {kind!r}; expected one of {OOD_KINDS}")
    return UnlabeledSet(x)


def load_csv(path, has_label, k=None):
    """Read a dataset in the ``f0,...,f{d-1}[,label]`` format.

    ``k`` bounds the labels when given; otherwise it is ``max(label) + 1``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        d = len(header) - 1 if has_label else len(header)
        if has_label and (not header or header[-1] != "label"):
            raise DataError(f"{path}: labeled file must end its header with 'label'")
        if d < 1 or header[:d] != [f"f{i}" for i in range(d)]:
            raise DataError(f"{path}: header must be f0,...,f{{d-1}}{',label' if has_label else ''}")
        width = len(header)
        rows, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                if has_label and len(row) == d:
                    raise DataError(f"{path}:{line_no}: missing label")
                raise DataError(f"{path}:{line_no}: expected {width} fields, found {len(row)}")
            try:
                rows.append([float(v) for v in row[:d]])
            except ValueError:
                raise DataError(f"{path}:{line_no}: non-numeric feature") from None
            if has_label:
                text = row[d].strip()
                if not text.isdigit():
                    raise DataError(f"{path}:{line_no}: label {text!r} is not a non-negative integer")
                label = int(text)
                if k is not None and label >= k:
                    raise DataError(f"{path}:{line_no}: label {label} out of range [0, {k})")
                labels.append(label)
    x = np.array(rows, dtype=np.float64).reshape(len(rows), d)
    if not has_label:
        return UnlabeledSet(x)
    y = np.array(labels, dtype=np.int64)
    k = k if k is not None else (int(y.max()) + 1 if len(y) else 0)
    return LabeledSet(x, y, k)


def write_csv(path, dataset):
    labeled = isinstance(dataset, LabeledSet)
    header = [f"f{i}" for i in range(dataset.d)] + (["label"] if labeled else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, row in enumerate(dataset.x):
            cells = [repr(float(v)) for v in row]
            writer.writerow(cells + [int(dataset.y[i])] if labeled else cells)


def round_half_up(value):
    return int(math.floor(value + 0.5))


def ood_budget(m, epsilon):
    """Number of training OOD samples N = M * eps / (1 - eps), rounded."""
    if m < 1:
        raise ValueError("M must be at least 1")
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")
    # Round away float noise first so that e.g. 950*0.05/0.95 lands on 50.
    return round_half_up(round(m * epsilon / (1.0 - epsilon), 9))


def batch_split(batch_size, epsilon):
    """ID and OOD rows per full batch."""
    if batch_size < 2:
        raise ValueError("batch_size must be at least 2")
    m_b = round_half_up(round(batch_size * (1.0 - epsilon), 9))
    if m_b < 1:
        raise ValueError(f"batch_size={batch_size} with epsilon={epsilon} leaves no ID rows")
    n_b = batch_size - m_b
    if epsilon > 0 and n_b == 0:
        warnings.warn(
            f"epsilon={epsilon} rounds to no OOD rows in a batch of {batch_size}; using 1",
            stacklevel=2,
        )
        n_b = 1
    return m_b, n_b


def make_batches(id_set, ood_train, spec, epoch=0):
    """Yield one epoch of mixture batches.

    Every ID sample appears exactly once. Each full batch holds ``M_b`` ID
    rows and ``N_b`` OOD rows; a trailing partial batch keeps the same ratio
    (at least one OOD row when ``N_b > 0``). OOD rows are drawn without
    replacement and reshuffled when exhausted.
    """
    m_b, n_b = batch_split(spec.batch_size, spec.epsilon)
    n_ood = 0 if ood_train is None else len(ood_train)
    if spec.epsilon == 0:
        n_b = 0
    elif n_ood == 0:
        warnings.warn("epsilon > 0 but no training OOD samples; batches are ID-only", stacklevel=2)
        n_b = 0
    elif n_ood != ood_budget(len(id_set), spec.epsilon):
        raise DataError(
            f"{n_ood} training OOD samples but the budget for M={len(id_set)}, "
            f"epsilon={spec.epsilon} is {ood_budget(len(id_set), spec.epsilon)}"
        )
    rng = np.random.default_rng([spec.seed, epoch])
    id_order = rng.permutation(len(id_set))
    ood_order = rng.permutation(n_ood) if n_b else np.empty(0, dtype=np.int64)
    ood_pos = 0
    d = id_set.d
    for start in range(0, len(id_set), m_b):
        idx = id_order[start:start + m_b]
        if not n_b:
            want = 0
        elif len(idx) == m_b:
            want = n_b
        else:
            want = max(1, round_half_up(len(idx) * n_b / m_b))
        picked = []
        while want > 0:
            if ood_pos == len(ood_order):
                ood_order = rng.permutation(n_ood)
                ood_pos = 0
            take = ood_order[ood_pos:ood_pos + want]
            ood_pos += len(take)
            want -= len(take)
            picked.append(take)
        ood_idx = np.concatenate(picked) if picked else np.empty(0, dtype=np.int64)
        ood_x = ood_train.x[ood_idx] if len(ood_idx) else np.empty((0, d))
        yield MixBatch(id_set.x[idx], id_set.y[idx], ood_x, idx)
