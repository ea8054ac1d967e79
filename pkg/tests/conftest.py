import pytest

from semeq.sim import ScenarioConfig, build_table

from helpers import analytic_table


@pytest.fixture
def small_cfg():
    t = analytic_table()
    return ScenarioConfig(N_set=t.N_set, Q_set=t.Q_set, T_slots=50), t


@pytest.fixture(scope="session")
def default_cfg():
    return ScenarioConfig()


@pytest.fixture(scope="session")
def default_table(default_cfg):
    return build_table(default_cfg)
