import os

import numpy as np
import pytest

from ipafail.tanner import random_binary_matrix

EXTENDED = os.environ.get("IPAFAIL_EXTENDED") == "1"


def pytest_collection_modifyitems(config, items):
    if EXTENDED:
        return
    skip = pytest.mark.skip(reason="extended run; set IPAFAIL_EXTENDED=1")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


def small_corpus(count=1000, m=6, n=10, seed=2024):
    """Seeded random binary matrices with column degrees in {2, 3}."""
    rng = np.random.default_rng(seed)
    return [random_binary_matrix(m, n, (2, 3), rng) for _ in range(count)]


@pytest.fixture(scope="session")
def corpus():
    return small_corpus()


_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; returns ``ok`` so the test can assert it."""

    def record(label: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.append((label, bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
