from __future__ import annotations

import functools
import time

import pytest

from singflow.census import census
from singflow.zoo import build_entry

ACCEPTANCE_LINES: list[str] = []
CENSUS_SECONDS: dict = {}


@functools.lru_cache(maxsize=None)
def cached_entry(label):
    return build_entry(label)


@functools.lru_cache(maxsize=None)
def cached_census(label, horizon_factor=1):
    """Census at the entry defaults, optionally with the horizon and burn-in scaled."""
    e = cached_entry(label)
    t0 = time.time()
    if horizon_factor == 1:
        c = census(e)
    else:
        c = census(e, horizon=e.horizon * horizon_factor, burn_in=e.burn_in * horizon_factor)
    CENSUS_SECONDS[(label, horizon_factor)] = time.time() - t0
    return c


def record(criterion, ok, detail=""):
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture
def report():
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
