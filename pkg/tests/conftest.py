import contextlib

import numpy as np
import pytest

from trbf import ols
from trbf.dataset import SynthConfig, synth_tokens


@pytest.fixture(autouse=True, scope="session")
def _ols_invariants():
    """Every selection run in the suite must satisfy the structural invariants."""
    seen = []

    def observer(state):
        ols.check_invariants(state)
        seen.append(state)

    ols.STATE_OBSERVERS.append(observer)
    yield seen
    ols.STATE_OBSERVERS.remove(observer)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_corpus():
    """A quick synthetic corpus: 30 train / 15 test tokens per class."""
    return synth_tokens(SynthConfig(n_train=30, n_test=15, seed=3))


@pytest.fixture(scope="session")
def full_corpus():
    """The default synthetic corpus (1500 train / 750 test tokens)."""
    return synth_tokens(SynthConfig())


@pytest.fixture(scope="session")
def small_model(small_corpus):
    """Ensemble trained on the small corpus with every training token as a candidate."""
    from trbf.core import NetConfig

    Xtr, ytr, _, _ = small_corpus
    ens, states = ols.train_ensemble(Xtr, ytr, Xtr, ytr, NetConfig())
    return ens


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion for the summary block."""

    @contextlib.contextmanager
    def run(number, title):
        notes = []
        try:
            yield notes
        except BaseException:
            ACCEPTANCE[number] = (False, title, notes)
            raise
        ACCEPTANCE[number] = (True, title, notes)

    return run


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, title, notes = ACCEPTANCE[number]
        detail = f" ({'; '.join(notes)})" if notes else ""
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {title}{detail}")
