import numpy as np
import pytest
from hypothesis import settings

from momentfield import NetworkConfig, model1, model2, one_population
from momentfield.activation import Activation

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def net1():
    """Excitatory-inhibitory pair with a finite size."""
    return model1(-0.5, 0.02)


@pytest.fixture
def net2():
    return model2(0.0, 0.0, 0.01)


@pytest.fixture
def onepop():
    return one_population(w=10.0, alpha=1.0, I=-5.0, n=0.02)


def random_network(rng, M, n=0.05, tanh=False):
    act = Activation.shifted_tanh(float(rng.uniform(-1, 1))) if tanh else Activation.logistic()
    return NetworkConfig(
        alpha=rng.uniform(0.5, 2.0, M),
        w=rng.normal(0, 3, (M, M)),
        inputs=rng.normal(0, 2, M),
        inv_sizes=np.full(M, n),
        activations=(act,) * M,
    )


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
