from __future__ import annotations

import os
from pathlib import Path

import pytest
from hypothesis import settings

from treelike.construction import Level, build_level, read_level, write_level

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


class Tower:
    """Levels built on demand and shared by the whole session."""

    def __init__(self, cache: Path):
        self.cache = cache
        self.levels: list[Level] = []

    def upto(self, n: int) -> list[Level]:
        while len(self.levels) <= n:
            k = len(self.levels)
            level = read_level(self.cache, k)
            if level is None:
                level = build_level(k, self.levels[-1] if self.levels else None)
                write_level(self.cache, level)
            self.levels.append(level)
        return self.levels[: n + 1]

    def __getitem__(self, n: int) -> Level:
        return self.upto(n)[n]


@pytest.fixture(scope="session")
def tower_cache(tmp_path_factory) -> Path:
    # TREELIKE_TEST_CACHE lets repeated local runs reuse built levels
    root = os.environ.get("TREELIKE_TEST_CACHE")
    return Path(root) if root else tmp_path_factory.mktemp("tower")


@pytest.fixture(scope="session")
def tower(tower_cache) -> Tower:
    return Tower(tower_cache)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
