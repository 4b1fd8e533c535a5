import random

import pytest

from fogsvd import crypto


@pytest.fixture(scope="session")
def toy_key():
    """64-bit modulus: fast, but too small for attack-resistant parameters."""
    return crypto.keygen(32, random.Random("toy-key"))


@pytest.fixture(scope="session")
def key1024():
    return crypto.keygen(512, random.Random("key-1024"))


def random_matrix(rng: random.Random, l: int, N: int, d: int) -> list[list[int]]:
    return [[rng.randint(0, d) for _ in range(N)] for _ in range(l)]


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, passed: bool, detail: str) -> None:
    line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
