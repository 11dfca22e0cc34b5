import warnings

import numpy as np
import pytest

from saood.runner.config import load_config


def small_config(**overrides):
    """A quick synthetic run: 5 epochs, small data, one decay."""
    pairs = {
        "train.epochs": "5",
        "train.lr_decay_epochs": "3",
        "train.hidden": "16,16",
        "train.batch_size": "50",
        "data.per_class": "50",
        "data.test_per_class": "50",
        "data.ood_test_n": "100",
    }
    pairs.update({k.replace("__", "."): str(v) for k, v in overrides.items()})
    return load_config(None, list(pairs.items()))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_epsilon_warning():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="method=baseline trains on ID data only")
        yield


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
