"""Independent numerical oracles.

Nothing here reuses the arithmetic it checks: gradients are compared against
central differences, AUROC against an exhaustive pair count, and the bound
chain is re-derived with scalar ``math`` loops before being compared with
the vectorised objectives.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import objective
from .detection import ScoreSet
from .gradnet import ParameterSet

LN2 = math.log(2.0)
ARITH_TOL = 1e-9
IDENTITY_TOL = 1e-10
SLACK_TOL = 1e-12


@dataclass
class Check:
    name: str
    passed: bool
    max_violation: float
    samples: int
    tolerance: float
    worst_input: str = ""


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def add(self, name, violations, tolerance, worst_inputs):
        violations = np.asarray(violations, dtype=np.float64)
        worst = int(np.argmax(violations)) if violations.size else 0
        vmax = float(violations[worst]) if violations.size else 0.0
        self.checks.append(Check(
            name=name,
            passed=bool(vmax <= tolerance),
            max_violation=vmax,
            samples=int(violations.size),
            tolerance=tolerance,
            worst_input=worst_inputs[worst] if violations.size else "",
        ))

    def merge(self, other):
        return VerifyReport(self.checks + other.checks)

    def to_dict(self):
        return {"ok": self.ok, "checks": [asdict(c) for c in self.checks]}

    def format(self):
        width = max((len(c.name) for c in self.checks), default=4)
        lines = [f"{'check':<{width}}  status  max_violation  tolerance  samples"]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(
                f"{c.name:<{width}}  {status:<6}  {c.max_violation:>13.3e}  "
                f"{c.tolerance:>9.0e}  {c.samples:>7d}"
            )
            if not c.passed:
                lines.append(f"  worst input: {c.worst_input}")
        return "\n".join(lines)


# -- gradients --------------------------------------------------------------

def finite_diff_grad(fn, params, h=1e-4):
    """Central differences of ``fn(ParameterSet) -> float`` per coordinate.

    The step for coordinate i is ``h * max(1, |theta_i|)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    sizes = params.layer_sizes
    theta = params.flat()
    grad = np.empty_like(theta)
    for i in range(theta.size):
        step = h * max(1.0, abs(theta[i]))
        plus, minus = theta.copy(), theta.copy()
        plus[i] += step
        minus[i] -= step
        f_plus = fn(ParameterSet.from_flat(sizes, plus))
        f_minus = fn(ParameterSet.from_flat(sizes, minus))
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise FloatingPointError(f"non-finite evaluation at coordinate {i}")
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return ParameterSet.from_flat(sizes, grad)


def gradient_error(analytic, numeric, abs_floor=1e-7):
    """Worst coordinate error: relative, but absolute where both sides are tiny."""
    a, b = analytic.flat(), numeric.flat()
    diff = np.abs(a - b)
    scale = np.maximum(np.abs(a), np.abs(b))
    rel = np.where(diff <= abs_floor, 0.0, diff / np.maximum(scale, 1e-300))
    return float(rel.max()) if rel.size else 0.0


# -- AUROC ------------------------------------------------------------------

def auroc_bruteforce(scores):
    """Exhaustive pair count, ties worth one half."""
    if not isinstance(scores, ScoreSet):
        scores = ScoreSet(*scores)
    wins = 0.0
    for s in scores.id_scores:
        for t in scores.ood_scores:
            if s > t:
                wins += 1.0
            elif s == t:
                wins += 0.5
    return wins / (scores.id_scores.size * scores.ood_scores.size)


# -- derivation chain -------------------------------------------------------

def _random_simplex(rng, k, temperature=1.0):
    z = rng.standard_normal(k) * temperature
    e = [math.exp(v - max(z)) for v in z]
    s = sum(e)
    return [v / s for v in e]


def _random_batch(rng, force_saturated=False):
    k = int(rng.integers(2, 11))
    m = int(rng.integers(1, 9))
    n_ood = int(rng.integers(0, 9))
    prior = _random_simplex(rng, k)
    rows = [_random_simplex(rng, k, temperature=float(rng.uniform(0.1, 6.0)))
            for _ in range(m + n_ood)]
    labels = [int(v) for v in rng.integers(0, k, size=m)]
    if force_saturated:
        for i in range(m):
            rows[i] = [1.0 if j == labels[i] else 0.0 for j in range(k)]
    return prior, rows, labels, m


def _clog(p):
    return math.log(max(p, objective.LOG_FLOOR))


def _sigmoid(s):
    return 1.0 / (1.0 + math.exp(-s))


def _scalar_terms(prior, rows, labels, m, alpha):
    """A, B, C, D and the SA estimate via scalar loops (beta = alpha / (1 - alpha))."""
    beta = alpha / (1.0 - alpha)
    true_p = [rows[i][labels[i]] for i in range(m)]
    mean_log_true = sum(_clog(p) for p in true_p) / m
    neg_ent = sum(sum(p * _clog(p) for p in row) for row in rows) / len(rows)
    log_sig_true = sum(math.log(_sigmoid(_clog(p))) for p in true_p) / m
    log_one_minus = sum(
        sum(w * math.log(1.0 - _sigmoid(_clog(p))) for w, p in zip(prior, row)) for row in rows
    ) / len(rows)
    reg = sum(sum((w - p) * _clog(p) for w, p in zip(prior, row)) for row in rows) / len(rows)
    return {
        "a": (1.0 - alpha) * mean_log_true,
        "b": -(1.0 - alpha) * beta * neg_ent,
        "c": alpha * log_sig_true,
        "d": -alpha * log_one_minus,
        "sa": mean_log_true + alpha * reg,
    }


def verify_bound_chain(trials, seed, alpha=None):
    """Check A + B + C + D + alpha*ln 2 >= SA on random batches, plus per-sample slacks.

    ``alpha`` fixes the combination weight; by default it is drawn uniformly
    from [0.05, 0.95] per trial. Every fifth trial uses saturated (one-hot)
    ID rows, where the log(phi + 1) <= log 2 step is tight.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    chain, ac_slack, bd_slack, dual = [], [], [], []
    chain_in, ac_in, bd_in, dual_in = [], [], [], []
    for t in range(trials):
        a_t = float(rng.uniform(0.05, 0.95)) if alpha is None else float(alpha)
        prior, rows, labels, m = _random_batch(rng, force_saturated=(t % 5 == 4))
        tag = f"trial={t} seed={seed} alpha={a_t!r} K={len(prior)} M={m} N={len(rows) - m}"
        terms = _scalar_terms(prior, rows, labels, m, a_t)
        total = terms["a"] + terms["b"] + terms["c"] + terms["d"]
        chain.append(terms["sa"] - (total + a_t * LN2))
        chain_in.append(tag)

        # A_i + C_i - (log phi - alpha ln 2) = alpha (ln 2 - ln(1 + phi)) >= 0
        for i in range(m):
            p = rows[i][labels[i]]
            lhs = (1.0 - a_t) * _clog(p) + a_t * math.log(_sigmoid(_clog(p)))
            ac_slack.append(-(lhs - (_clog(p) - a_t * LN2)))
            ac_in.append(f"{tag} id_row={i} phi={p!r}")
        # alpha E_p[log(phi + 1)] >= alpha E_p[log phi], per mixture row
        for j, row in enumerate(rows):
            upper = a_t * sum(w * math.log(p + 1.0) for w, p in zip(prior, row))
            lower = a_t * sum(w * _clog(p) for w, p in zip(prior, row))
            bd_slack.append(lower - upper)
            bd_in.append(f"{tag} mix_row={j}")

        got = objective.bound_terms(np.array(rows[:m]), labels, np.array(rows), prior, a_t)
        dual.append(max(abs(got.a - terms["a"]), abs(got.b - terms["b"]), abs(got.c - terms["c"]),
                        abs(got.d - terms["d"]), abs(got.sa - terms["sa"])))
        dual_in.append(tag)

    report = VerifyReport()
    report.add("bound_chain", chain, ARITH_TOL, chain_in)
    report.add("slack_log_phi_plus_one", ac_slack, SLACK_TOL, ac_in)
    report.add("slack_log_monotone", bd_slack, SLACK_TOL, bd_in)
    report.add("bound_terms_dual_route", dual, ARITH_TOL, dual_in)
    return report


def verify_identities(trials, seed):
    """Sigma, density-ratio and product-rule identities on random inputs."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    sig, logit, ratio, product = [], [], [], []
    sig_in, logit_in, ratio_in, prod_in = [], [], [], []
    for t in range(trials):
        phi = 1.0 if t % 10 == 0 else math.exp(-float(rng.uniform(0.0, 20.0)))
        tag = f"trial={t} seed={seed} phi={phi!r}"
        d = objective.discriminator_d(phi)
        sig.append(abs(_sigmoid(math.log(phi)) - d))
        sig_in.append(tag)
        logit.append(abs(math.log(d / (1.0 - d)) - math.log(phi)))
        logit_in.append(tag)
        ratio.append(abs(math.exp(math.log(d / (1.0 - d))) - phi))
        ratio_in.append(tag)

        # product-rule form of MBCE, with the prior equal to the batch class frequencies
        k = int(rng.integers(2, 8))
        labels = list(range(k)) + [int(v) for v in rng.integers(0, k, size=int(rng.integers(0, 10)))]
        m = len(labels)
        rows = [_random_simplex(rng, k, temperature=float(rng.uniform(0.1, 4.0)))
                for _ in range(m + int(rng.integers(0, 10)))]
        prior = [labels.count(c) / m for c in range(k)]
        per_class = 0.0
        for c in range(k):
            members = [i for i in range(m) if labels[i] == c]
            id_part = sum(math.log(_sigmoid(_clog(rows[i][c]))) for i in members) / len(members)
            mix_part = sum(math.log(1.0 - _sigmoid(_clog(row[c]))) for row in rows) / len(rows)
            per_class += prior[c] * (id_part - mix_part)
        direct = objective.mbce_loss(np.array(rows[:m]), labels, np.array(rows), prior)
        product.append(abs(direct - per_class))
        prod_in.append(f"trial={t} seed={seed} K={k} M={m} N={len(rows) - m}")

    report = VerifyReport()
    report.add("sigma_of_log_phi", sig, IDENTITY_TOL, sig_in)
    report.add("inverse_sigma_roundtrip", logit, IDENTITY_TOL, logit_in)
    report.add("density_ratio_recovers_phi", ratio, IDENTITY_TOL, ratio_in)
    report.add("mbce_product_rule", product, IDENTITY_TOL, prod_in)
    return report
