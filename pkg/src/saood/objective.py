"""Supervision-adaptation objectives and their components.

Every objective here is written in the maximisation convention; the trainer
minimises its negation. Functions accept plain arrays (and return floats) or
:class:`~saood.gradnet.Tensor` values (and return Tensors, for backprop).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gradnet import autodiff as ad
from .gradnet.autodiff import Tensor

LOG_FLOOR = 1e-12


def _is_tensor(*xs):
    return any(isinstance(x, Tensor) for x in xs)


def _out(value, differentiable):
    return value if differentiable else value.item()


def _clog(p):
    return ad.log(ad.clamp_min(p, LOG_FLOOR))


def _labels(labels, n):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    return labels


def softmax_probs(logits):
    """Row-wise softmax computed from max-shifted exponentials."""
    tensor_in = isinstance(logits, Tensor)
    x = ad.as_tensor(logits)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError(f"logits must be n x K with K >= 2, got shape {x.shape}")
    if not np.isfinite(x.data).all():
        raise ValueError("non-finite logits")
    e = ad.exp(x - ad.row_max(x))
    probs = e / e.sum(axis=1, keepdims=True)
    return probs if tensor_in else probs.data


def class_prior(labels, k):
    """Empirical class frequencies; every class must occur at least once."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError("class_prior needs a non-empty 1-D label array")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    counts = np.bincount(labels, minlength=k)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ValueError(f"class(es) {missing.tolist()} absent from the labels")
    return counts / labels.size


def ce_term(probs, labels):
    """Mean log-probability of the true class (<= 0)."""
    if len(probs) == 0:
        raise ValueError("empty ID batch")
    diff = _is_tensor(probs)
    p = ad.as_tensor(probs)
    y = _labels(labels, p.shape[0])
    return _out(_clog(p[np.arange(len(y)), y]).mean(), diff)


def _regularizer_rows(probs, prior):
    p = ad.as_tensor(probs)
    prior = np.asarray(prior, dtype=np.float64)
    return ((Tensor(prior) - p) * _clog(p)).sum(axis=1)


def sa_regularizer(prob_row, prior):
    """R(x) = sum_y (prior[y] - phi[y]) * log phi[y] for one probability row."""
    diff = _is_tensor(prob_row)
    row = ad.as_tensor(prob_row)
    if row.ndim != 1:
        raise ValueError("sa_regularizer takes a single row; see sa_regularizer_rows")
    return _out(_regularizer_rows(row[None, :], prior)[0], diff)


def sa_regularizer_rows(probs, prior):
    """Vectorised R(x) over the rows of a probability matrix."""
    diff = _is_tensor(probs)
    r = _regularizer_rows(probs, prior)
    return r if diff else r.data


def sa_loss(id_probs, id_labels, mix_probs, prior, alpha):
    """Empirical SA objective.

    Mean true-class log-probability over ID rows plus ``alpha`` times the mean
    of R(x) over the mixture rows (ID and OOD together).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    diff = _is_tensor(id_probs, mix_probs)
    ce = ce_term(ad.as_tensor(id_probs), id_labels)
    reg = _regularizer_rows(mix_probs, prior).mean()
    return _out(ce + alpha * reg, diff)


def discriminator_d(prob):
    """Density-ratio discriminator sigma(log phi) = phi / (1 + phi)."""
    p = np.asarray(prob, dtype=np.float64)
    if np.any(~(p > 0)) or np.any(p > 1):
        raise ValueError("discriminator_d needs probabilities in (0, 1]")
    d = p / (1.0 + p)
    return float(d) if d.ndim == 0 else d


def _log_d(p):
    # log(phi / (1 + phi))
    return _clog(p) - ad.log1p(p)


def _log_one_minus_d(p):
    # log(1 - phi / (1 + phi)) = -log(1 + phi)
    return -ad.log1p(p)


def mbce_loss(id_probs, id_labels, mix_probs, prior):
    """Multiple binary cross-entropy objective, signs as in the derivation.

    First term: mean over ID pairs of log D(x, y). Second term: minus the mean
    over mixture rows of sum_y prior[y] * log(1 - D(x, y)).
    """
    if len(id_probs) == 0:
        raise ValueError("empty ID batch")
    diff = _is_tensor(id_probs, mix_probs)
    p_id = ad.as_tensor(id_probs)
    y = _labels(id_labels, p_id.shape[0])
    first = _log_d(p_id[np.arange(len(y)), y]).mean()
    weights = Tensor(np.asarray(prior, dtype=np.float64))
    second = (weights * _log_one_minus_d(ad.as_tensor(mix_probs))).sum(axis=1).mean()
    return _out(first - second, diff)


def msmi_loss(id_probs, id_labels, mix_probs, beta, stop_gradient=False):
    """Mixed-space MI objective with the unknown posterior replaced by phi.

    The second term is ``beta`` times the mean Shannon entropy of the mixture
    rows. With ``stop_gradient`` the weighting factor phi is treated as a
    constant target, so gradients flow only through the log.
    """
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    diff = _is_tensor(id_probs, mix_probs)
    ce = ce_term(ad.as_tensor(id_probs), id_labels)
    p = ad.as_tensor(mix_probs)
    target = p.detach() if stop_gradient else p
    entropy = -(target * _clog(p)).sum(axis=1)
    return _out(ce + beta * entropy.mean(), diff)


@dataclass(frozen=True)
class LossBreakdown:
    a: float
    b: float
    c: float
    d: float
    sa: float
    msmi: float
    mbce: float

    @property
    def total(self):
        return self.a + self.b + self.c + self.d


def bound_terms(id_probs, id_labels, mix_probs, prior, alpha):
    """The four terms of the combined MSMI/MBCE objective, with beta = alpha/(1-alpha).

    Also evaluates the SA, MSMI and MBCE objectives on the same rows so that
    ``a + b + c + d + alpha*ln 2 >= sa`` can be checked directly.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    id_probs = np.asarray(id_probs, dtype=np.float64)
    mix_probs = np.asarray(mix_probs, dtype=np.float64)
    if len(id_probs) == 0 or len(mix_probs) == 0:
        raise ValueError("bound_terms needs non-empty ID and mixture batches")
    prior = np.asarray(prior, dtype=np.float64)
    y = _labels(id_labels, len(id_probs))
    beta = alpha / (1.0 - alpha)
    true_p = id_probs[np.arange(len(y)), y]
    log_mix = np.log(np.maximum(mix_probs, LOG_FLOOR))

    a = (1.0 - alpha) * float(np.mean(np.log(np.maximum(true_p, LOG_FLOOR))))
    b = -(1.0 - alpha) * beta * float(np.mean((mix_probs * log_mix).sum(axis=1)))
    d_true = np.maximum(true_p, LOG_FLOOR) / (1.0 + true_p)
    d_mix = mix_probs / (1.0 + mix_probs)
    c = alpha * float(np.mean(np.log(d_true)))
    d = -alpha * float(np.mean((prior * np.log1p(-d_mix)).sum(axis=1)))
    return LossBreakdown(
        a=a,
        b=b,
        c=c,
        d=d,
        sa=sa_loss(id_probs, y, mix_probs, prior, alpha),
        msmi=msmi_loss(id_probs, y, mix_probs, beta),
        mbce=mbce_loss(id_probs, y, mix_probs, prior),
    )

