import time

import numpy as np
import pytest

from mcsep.cli import cmd_simulate
from mcsep.config import PipelineConfig
from mcsep.room import ArrayGeometry
from mcsep.spectral import MultiChannelWaveform, StftConfig

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def geometry():
    return ArrayGeometry.from_gaps()


@pytest.fixture(scope="session")
def cfg():
    return StftConfig()


def random_wave(rng, channels=1, n=16000, fs=16000):
    return MultiChannelWaveform(rng.standard_normal((channels, n)), fs)


@pytest.fixture(scope="session")
def acceptance_corpus(tmp_path_factory):
    """The fixed 20-utterance corpus (scene seeds 0-19), simulated single-threaded."""
    out = tmp_path_factory.mktemp("acceptance_corpus")
    start = time.perf_counter()
    manifest = cmd_simulate(PipelineConfig(seed=0, jobs=1), 20, out)
    return manifest, time.perf_counter() - start


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
