import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from headbasis.config import TrainConfig
from headbasis.face import load_desk_face_model
from headbasis.synth import SynthConfig, synth_dataset
from headbasis.training import train

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def face():
    return load_desk_face_model()


@pytest.fixture(scope="session")
def small_corpus():
    return synth_dataset(SynthConfig(classes=("still", "nod", "shake", "tilt"),
                                     clips_per_class=8, seed=3))


SMALL_CFG = TrainConfig(lr=1e-3, lr_decayed=2e-4, lr_decay_step=100, stage1_steps=150,
                        stage2_steps=80, stage3_steps=40, batch_size=8, log_every=20, seed=5)


@pytest.fixture(scope="session")
def small_ckpt(small_corpus):
    """A briefly trained model: enough for contracts, not for quality."""
    return train(small_corpus, SMALL_CFG)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from _util import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
