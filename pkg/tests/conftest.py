import math

import numpy as np
import pytest
from hypothesis import settings

from wqed_transport.config import SystemConfig

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

PI = math.pi


@pytest.fixture
def single_mode():
    return SystemConfig(n_left=10, n_right=10, xi_left=1.8 * PI, xi_d=1.5 * PI,
                        xi_right=1.158 * PI, directionality=0.5)


def random_config(rng: np.random.Generator, n_max: int = 8, **fixed) -> SystemConfig:
    """Generic (non-Bragg, non-defective) configuration with spacings in (pi, 2 pi)."""
    n_left = int(rng.integers(1, n_max))
    n_right = int(rng.integers(1, n_max))
    x = rng.uniform(1.05, 1.95, size=3) * PI
    kw = dict(n_left=n_left, n_right=n_right, xi_left=x[0], xi_d=x[1], xi_right=x[2],
              directionality=float(rng.uniform(-0.9, 0.9)))
    kw.update(fixed)
    return SystemConfig(**kw)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
