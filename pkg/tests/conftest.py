import numpy as np
import pytest

from ecgrhythm.io import synth_ecg
from ecgrhythm.signal import EcgRecord


class StubCnn:
    """Returns fixed probabilities and counts its calls."""

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=float)
        self.calls = 0

    def predict(self, segments):
        self.calls += 1
        assert len(segments) >= 1
        return self.probs


class StubPost:
    def __init__(self, verdict):
        self.verdict = verdict
        self.calls = 0

    def predict(self, x):
        self.calls += 1
        assert len(x) == 437
        return self.verdict, 0.0


@pytest.fixture
def clean_record():
    rec, peaks = synth_ecg(75, 60, 300, noise_sd=0.0, seed=0)
    return rec, peaks


@pytest.fixture
def noise_record():
    x = np.random.default_rng(2024).normal(0.0, 1.0, 60 * 300)
    return EcgRecord("noise", 300, x)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
