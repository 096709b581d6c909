import numpy as np
import pytest

from nvensemble import fields, hamiltonians as ham


@pytest.fixture(scope="session")
def measured_params():
    return ham.PhenomenologicalParams.from_mhz(2.64), ham.PhenomenologicalParams.from_mhz(1.03)


@pytest.fixture(scope="session")
def pheno_members(measured_params):
    pa, pb = measured_params
    return [ham.phenomenological_member("A", pa, weight=0.5), ham.phenomenological_member("B", pb, weight=0.5)]


@pytest.fixture(scope="session")
def pheno_iq_members(measured_params):
    pa, pb = measured_params
    return [
        ham.phenomenological_member("A", pa, weight=0.5, mode="iq"),
        ham.phenomenological_member("B", pb, weight=0.5, mode="iq"),
    ]


@pytest.fixture(scope="session")
def focal_fields():
    """Both channel fields in rad/us at the point where the fields meet at 115 deg, 70 um up."""
    geom = fields.MicrostripGeometry()
    x = fields.find_focal_x(geom, 70.0, 115.0)
    return [fields.strip_field(geom, c, (x, 70.0)).as_array() * geom.rabi_scale() for c in (1, 2)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA: list[str] = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _CRITERIA.extend(v for k, v in report.user_properties if k == "criterion")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
