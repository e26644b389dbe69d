from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from sbmclt.spectral import Kernel, TypeProfile

# wall-clock deadlines are meaningless on a loaded single-core runner
settings.register_profile("sbmclt", deadline=None)
settings.load_profile("sbmclt")


@st.composite
def kernels(draw, d_min: int = 1, d_max: int = 3, lo: float = 0.05, hi: float = 6.0):
    """Symmetric kernels with strictly positive entries and a matching positive ``mu``."""
    d = draw(st.integers(d_min, d_max))
    entries = st.floats(lo, hi, allow_nan=False)
    K = np.zeros((d, d))
    for i in range(d):
        for j in range(i, d):
            K[i, j] = K[j, i] = draw(entries)
    w = np.array([draw(st.floats(0.2, 1.0)) for _ in range(d)])
    mu = w / w.sum()
    mu[-1] = 1.0 - mu[:-1].sum()
    return Kernel(K), TypeProfile(mu)


@pytest.fixture
def benchmark_model():
    return Kernel([[3.0, 1.0], [1.0, 2.0]]), TypeProfile([0.6, 0.4])


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def record_criterion(request):
    """Collect one ``criterion N: PASS|FAIL`` line for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
