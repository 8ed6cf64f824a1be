import numpy as np
import pytest

from mmreg.synth import render_phantom

_CRITERIA = {}


def _record(number, passed, detail):
    _CRITERIA[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")


@pytest.fixture
def record_criterion():
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def smooth_image(size=64, seed=0):
    """Band-limited random image in roughly [0, 1]."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    out = np.full((size, size), 0.5)
    for _ in range(6):
        kx, ky = rng.uniform(-1, 1, 2) * 2 * np.pi / 16
        out += 0.07 * np.cos(kx * xs + ky * ys + rng.uniform(0, 2 * np.pi))
    return out


def phantom(size=64, gap=0.0):
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    return render_phantom(xs, ys, size, gap)


@pytest.fixture
def smooth():
    return smooth_image()


@pytest.fixture
def face64():
    return phantom(64)


@pytest.fixture
def face128():
    return phantom(128)
