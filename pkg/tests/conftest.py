from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from obstaclewave import pipeline
from obstaclewave.config import load_config

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def configs_dir() -> Path:
    return CONFIGS


@pytest.fixture(scope="session")
def baseline_cfg():
    return load_config(CONFIGS / "baseline.ini")


@pytest.fixture(scope="session")
def baseline_ctx(baseline_cfg):
    return pipeline.build_context(baseline_cfg)


@pytest.fixture(scope="session")
def quick_ctx():
    return pipeline.build_context(load_config(CONFIGS / "quick.ini"))


@pytest.fixture
def acceptance():
    """Record one pass/fail line for a criterion and return the flag."""
    def record(criterion: int, ok: bool, detail: str) -> bool:
        line = f"[criterion {criterion:2d}] {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
