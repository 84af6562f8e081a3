import numpy as np
import pytest

from nnlab.pointprocess import Sample, WindowSpec


def make_sample(points, side, origin_index=None):
    """Sample from explicit coordinates; a 1-D list becomes a column of positions."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    d = pts.shape[1]
    if origin_index is None:
        origin_index = int(np.flatnonzero(np.all(pts == 0.0, axis=1))[0])
    return Sample(WindowSpec(d, float(side)), pts, origin_index)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
