import numpy as np
import pytest
from hypothesis import settings

from qaplon.generators import GeneratorParams, generate
from qaplon.qap import QapInstance

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def make_instance(cls="uniform", n=6, seed=0, **kw):
    return generate(GeneratorParams(cls=cls, n=n, seed=seed, **kw))


def zero_a(n, seed=0):
    rng = np.random.default_rng(seed)
    B = rng.integers(0, 10, size=(n, n))
    return QapInstance(np.zeros((n, n), dtype=np.int64), B)


def float_instance(n, seed=0):
    rng = np.random.default_rng(seed)
    return QapInstance(rng.random((n, n)) * 10, rng.random((n, n)) * 10)


@pytest.fixture
def small_uniform():
    return make_instance("uniform", 6, 11)


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
