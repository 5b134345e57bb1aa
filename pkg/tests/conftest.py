import numpy as np
import pytest

from fishcal.synth import sample_parameters, synthetic_panorama

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def gradient_pano():
    return synthetic_panorama(512, "gradient", seed=3)


@pytest.fixture(scope="session")
def horizon_pano():
    return synthetic_panorama(1024, "horizon", band_deg=1.0)


@pytest.fixture(scope="session")
def train_draws():
    """10^5 train-split cameras drawn from one seeded stream."""
    rng = np.random.Generator(np.random.Philox(2024))
    return [sample_parameters("train", rng) for _ in range(100_000)]
