import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from patternmark.generation import GenerationConfig, generate_watermarked, make_random_logit_model  # noqa: E402
from patternmark.pattern import parse_pattern, partition_vocabulary, valid_windows  # noqa: E402


@pytest.fixture(scope="session")
def ab():
    return parse_pattern("AB")


@pytest.fixture(scope="session")
def acad():
    return parse_pattern("ACADBCBD")


@pytest.fixture(scope="session")
def ab_windows(ab):
    return valid_windows(ab, 2)


@pytest.fixture(scope="session")
def small_world(ab):
    part = partition_vocabulary(64, 2, 7)
    model = make_random_logit_model(64, 0.07, 3)
    return ab, part, model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def soft_text(world, seed, delta=5.8, length=64, hard=False):
    pattern, part, model = world
    return generate_watermarked(model, pattern, part, GenerationConfig(delta=delta, hard=hard, length=length, seed=seed))


def pytest_terminal_summary(terminalreporter):
    from criteria import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
