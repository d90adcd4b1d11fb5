import numpy as np
import pytest
from hypothesis import settings

from advtts.dsp.corpus import make_synthetic_corpus
from advtts.training.data import build_items
from advtts.wavenet import WaveNet, WaveNetConfig

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_corpus():
    return make_synthetic_corpus(2, 3, 0.25, seed=7)


@pytest.fixture(scope="session")
def tiny_items(tiny_corpus):
    return build_items(tiny_corpus)


def small_wavenet(seed=0, blocks=4, channels=8, **kw):
    cfg = WaveNetConfig(blocks=blocks, residual_channels=channels, skip_channels=channels, **kw)
    return WaveNet(np.random.default_rng(seed), cfg)


@pytest.fixture
def tiny_wavenet():
    return small_wavenet()


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
