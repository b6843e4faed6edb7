import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from c2approx.geometry import make_box, make_interval, make_unit_disk
from c2approx.sampling import build_grid

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def disk():
    return make_unit_disk()


@pytest.fixture(scope="session")
def up_chart(disk):
    return next(c for c in disk.charts if c.name == "up2")


@pytest.fixture(scope="session")
def disk_grid(disk):
    return build_grid(disk, 24)


@pytest.fixture(scope="session")
def square():
    return make_box([0.0, 0.0], [1.0, 1.0])


@pytest.fixture(scope="session")
def interval():
    return make_interval()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one verdict line per acceptance criterion, printed after the run
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def verdict():
    def record(k, ok, detail):
        ACCEPTANCE[str(k)] = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE, key=lambda s: (int(s.split()[0]), s)):
            terminalreporter.write_line(ACCEPTANCE[k])
