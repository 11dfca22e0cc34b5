import json
import math

import numpy as np
import pytest

from saood import objective, oracle
from saood.detection import ScoreSet
from saood.gradnet import ParameterSet, grad_of_loss, init_params


def flat_params(values):
    v = np.asarray(values, dtype=np.float64)
    return ParameterSet([(v.reshape(1, -1), np.zeros(1))])


def test_finite_diff_quadratic():
    p = flat_params([0.3, -1.2, 2.5])
    g = oracle.finite_diff_grad(lambda q: float(np.sum(q.flat() ** 2)), p)
    np.testing.assert_allclose(g.flat(), 2 * p.flat(), atol=1e-6)


def test_finite_diff_constant():
    g = oracle.finite_diff_grad(lambda q: 4.0, flat_params([1.0, 2.0]))
    assert np.all(g.flat() == 0)


def test_finite_diff_bilinear():
    def f(q):
        w = q.layers[0][0]
        return float(w[0, 0] * w[0, 1])
    g = oracle.finite_diff_grad(f, flat_params([2.0, 3.0]))
    np.testing.assert_allclose(g.layers[0][0][0], [3.0, 2.0], atol=1e-6)


def test_finite_diff_rejects_nonfinite_and_bad_step():
    with pytest.raises(FloatingPointError):
        oracle.finite_diff_grad(lambda q: float("inf"), flat_params([1.0]))
    with pytest.raises(ValueError):
        oracle.finite_diff_grad(lambda q: 0.0, flat_params([1.0]), h=0.0)


def test_sa_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    p = init_params([2, 8, 8, 3], 5)
    x = rng.normal(size=(9, 2))
    labels = np.array([0, 1, 2, 0, 1, 2])
    prior = np.array([0.2, 0.3, 0.5])

    def loss(z):
        probs = objective.softmax_probs(z)
        return -objective.sa_loss(probs[:6], labels, probs, prior, 0.2)

    _, g = grad_of_loss(p, loss, x)
    numeric = oracle.finite_diff_grad(lambda q: grad_of_loss(q, loss, x)[0], p)
    assert oracle.gradient_error(g, numeric) <= 1e-4


def test_bruteforce_examples():
    assert oracle.auroc_bruteforce(ScoreSet([1.0], [0.0])) == 1.0
    assert oracle.auroc_bruteforce(ScoreSet([0.5], [0.5])) == 0.5
    assert oracle.auroc_bruteforce(ScoreSet([0.9, 0.4], [0.6, 0.2])) == 0.75


def test_verify_bound_chain_passes():
    report = oracle.verify_bound_chain(300, 0)
    assert report.ok, report.format()
    names = {c.name for c in report.checks}
    assert {"bound_chain", "slack_log_phi_plus_one", "slack_log_monotone"} <= names
    assert all(c.samples >= 300 for c in report.checks)


def test_verify_alpha_zero_is_equality():
    report = oracle.verify_bound_chain(200, 1, alpha=0.0)
    chain = next(c for c in report.checks if c.name == "bound_chain")
    # with alpha = 0 the chain is A = SA; only rounding separates the two routes
    assert chain.passed and abs(chain.max_violation) <= 1e-15


def test_saturated_row_slack_is_zero():
    alpha, phi = 0.37, 1.0
    lhs = (1 - alpha) * math.log(phi) + alpha * math.log(objective.discriminator_d(phi))
    assert lhs - (math.log(phi) - alpha * math.log(2)) == 0.0


def test_verify_identities_examples():
    assert objective.discriminator_d(1.0) == 0.5 == 1 / (1 + 1)
    d = objective.discriminator_d(0.25)
    assert d == pytest.approx(0.2, abs=1e-15)
    assert math.log(d / (1 - d)) == pytest.approx(math.log(0.25), abs=1e-12)
    report = oracle.verify_identities(300, 2)
    assert report.ok, report.format()
    assert len(report.checks) == 4


def test_report_fails_and_names_worst_input():
    r = oracle.VerifyReport()
    r.add("demo", [0.0, 5e-9, 1e-12], 1e-9, ["a", "b", "c"])
    assert not r.ok
    assert r.checks[0].worst_input == "b"
    text = r.format()
    assert "FAIL" in text and "worst input: b" in text
    json.dumps(r.to_dict())


def test_report_pass_iff_within_tolerance():
    r = oracle.VerifyReport()
    r.add("edge", [1e-9], 1e-9, ["x"])
    r.add("over", [1.0000001e-9], 1e-9, ["y"])
    assert [c.passed for c in r.checks] == [True, False]
