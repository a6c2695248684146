import json
import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from cylscat.complex import annulus, disk, flat_cylinder, genus1_one_hole, junction
from cylscat.dec import assemble

settings.register_profile("ci", deadline=None, derandomize=True, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

HERE = os.path.dirname(__file__)


@pytest.fixture(scope="session")
def oracle():
    with open(os.path.join(HERE, "oracle_values.json")) as fh:
        return json.load(fh)


BUILDERS = {
    "flat_cylinder": lambda: flat_cylinder(2.0, 1.0, 16),
    "junction": lambda: junction(resolution=16),
    "disk": lambda: disk(1.0, 16),
    "annulus": lambda: annulus(1.0, 2.0, 12),
    "genus1_one_hole": lambda: genus1_one_hole(1.0, 8),
}

_cache = {}


def fixture_ops(name):
    if name not in _cache:
        _cache[name] = assemble(BUILDERS[name]())
    return _cache[name]


@pytest.fixture(scope="session", params=sorted(BUILDERS))
def any_ops(request):
    return request.param, fixture_ops(request.param)


@pytest.fixture(scope="session")
def flat_ops():
    return fixture_ops("flat_cylinder")


@pytest.fixture(scope="session")
def junction_ops():
    return fixture_ops("junction")


@pytest.fixture(scope="session")
def disk_ops():
    return fixture_ops("disk")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "_results", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
