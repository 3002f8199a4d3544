import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_density_matrix(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


def random_hermitian(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (A + A.conj().T)


def random_counted_bundle(rng, d, n_ops=3):
    """Random GKSL bundle whose channels carry integer particle weights."""
    from openchain.generators import GeneratorBundle, JumpChannel

    H = random_hermitian(rng, d)
    chans = []
    for k in range(n_ops):
        A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        w = float(rng.integers(-1, 2)) if k else 1.0
        chans.append(JumpChannel(A, A, float(rng.uniform(0.2, 1.0)), {"particle": w}, 0, f"c{k}"))
    return GeneratorBundle(H, tuple(chans))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
