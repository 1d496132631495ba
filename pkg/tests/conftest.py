import os
import warnings
from pathlib import Path

import pytest

from sparsenet.dataset import MNIST_FILES

MNIST_DIR = Path(os.environ.get("MNIST_DIR", "/root/data/mnist"))


def mnist_available(directory: Path = MNIST_DIR) -> bool:
    names = [n for pair in MNIST_FILES.values() for n in pair]
    return all((directory / n).exists() or (directory / (n + ".gz")).exists() for n in names)


@pytest.fixture
def mnist_dir() -> Path:
    if not mnist_available():
        warnings.warn(f"MNIST files not found in {MNIST_DIR}; set MNIST_DIR to run this test")
        pytest.skip(f"MNIST files not found in {MNIST_DIR}")
    return MNIST_DIR


ACCEPTANCE_LINES = {}


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
