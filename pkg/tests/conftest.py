import numpy as np
import pytest

from arcstab.classify import Dataset, train
from arcstab.features import extract
from arcstab.signal import synthesize_dataset_trace

# lines collected by the acceptance checks, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_trace():
    return synthesize_dataset_trace(seed=0)


@pytest.fixture(scope="session")
def default_rows(default_trace):
    return extract(default_trace)


@pytest.fixture(scope="session")
def default_ds(default_rows):
    return Dataset.from_vectors([v for _, v in default_rows], [f.label for f, _ in default_rows])


@pytest.fixture(scope="session")
def svm_model(default_ds):
    return train(default_ds, "svm")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tone(freq=50.0, amp=100.0, n=200, fs=10_000.0, phase=np.pi / 4):
    t = np.arange(n) / fs
    return amp * np.sin(2 * np.pi * freq * t + phase)
