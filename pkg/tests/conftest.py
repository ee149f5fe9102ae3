import numpy as np
import pytest

from confined_nls import PotentialSpec, XGrid, YGrid, build_eigenbasis, gaussian_field
from confined_nls.field import Field, Representation, as_physical


@pytest.fixture(scope="session")
def harmonic_small():
    return build_eigenbasis(PotentialSpec.harmonic(1.0), XGrid(8.0, 64), 32)


@pytest.fixture(scope="session")
def ygrid_small():
    return YGrid(2, 16.0, 64)


@pytest.fixture(scope="session")
def ygrid_3d():
    return YGrid(3, 8.0, 16)


def _random_resolved(basis, ygrid, rng, scale=1.0, kmax=None):
    """Random field inside the spectral span, with a soft y-frequency cutoff."""
    shape = (basis.n_modes,) + ygrid.shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c *= np.exp(-0.2 * np.arange(basis.n_modes)).reshape((-1,) + (1,) * ygrid.dim)
    cut = (kmax or ygrid.N_y / 8) * np.pi / ygrid.L_y
    c *= np.exp(-ygrid.eta_sq() / (2 * cut**2))[None]
    f = Field(basis, ygrid, scale * c / np.sqrt(np.sum(np.abs(c) ** 2)), Representation.SPECTRAL)
    return as_physical(f)


@pytest.fixture(scope="session")
def random_resolved():
    return _random_resolved


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def gaussian_small(harmonic_small, ygrid_small):
    return gaussian_field(harmonic_small, ygrid_small, amplitude=0.3, wy=1.5)


# acceptance summary: one PASS/FAIL line per criterion

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    n, title = mark.args
    measured = getattr(item.module, "MEASURED", {}).get(n, "")
    prev = _CRITERIA.get(n)
    passed = rep.passed and (prev is None or prev[1])
    _CRITERIA[n] = (title, passed, measured)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, passed, measured = _CRITERIA[n]
        line = f"{'PASS' if passed else 'FAIL'}  criterion {n:>2}: {title}"
        if measured:
            line += f"  [{measured}]"
        terminalreporter.write_line(line)
