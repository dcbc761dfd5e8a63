import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from assortopt.instance import CapacityConstraint, Instance

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_toy(kappa=1.0, rho=(3.0, 1.0)):
    """One class, nu0 = 1, nu = (1, 2), cardinality budget ``kappa``."""
    return Instance(gamma=[1.0], nu0=[1.0], nu=[[1.0, 2.0]], rho=[list(rho)],
                    constraints=(CapacityConstraint.cardinality(2, kappa),), seed=0, family="toy")


@pytest.fixture
def toy():
    return make_toy()


def pytest_collection_modifyitems(config, items):
    if os.environ.get("ASSORTOPT_STRETCH", "0") == "1":
        return
    skip = pytest.mark.skip(reason="stretch run; set ASSORTOPT_STRETCH=1")
    for item in items:
        if "stretch" in item.keywords:
            item.add_marker(skip)


def random_instance(rng, n, m, kappa=None, class_prices=True):
    nu = rng.uniform(0, 1, (m, n))
    rho = rng.uniform(1, 3, (m, n)) if class_prices else np.broadcast_to(rng.uniform(1, 3, n), (m, n))
    kappa = float(rng.integers(0, n + 1)) if kappa is None else kappa
    return Instance(rng.uniform(0.1, 1, m), rng.choice([0.5, 1.0, 3.0], m), nu, rho,
                    (CapacityConstraint.cardinality(n, kappa),), seed=int(rng.integers(1 << 30)))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
