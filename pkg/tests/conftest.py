import numpy as np
import pytest

from shotdown import StableLaw, annulus
from shotdown.geometry import ball, harnack7
from shotdown.rng import stream


@pytest.fixture
def rng():
    return stream(12345)


@pytest.fixture
def ann():
    return annulus(1.0, 2.0)


@pytest.fixture
def disc():
    return ball((0.0, 0.0), 1.0)


@pytest.fixture
def pinched():
    return harnack7()


@pytest.fixture
def cauchy2():
    return StableLaw(2, 1.0)


def within(est, exact, k=4.0):
    """|estimate - exact| within k standard errors."""
    return abs(est.value - exact) <= k * est.stderr


def pts(rng, domain, n):
    return domain.sample_uniform(rng, n)[0]



_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """criterion number -> (title, passed, detail); printed at the end of the run."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {k:2d}  {title}: {detail}")
