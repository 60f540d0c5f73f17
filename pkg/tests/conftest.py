import pytest

from planner_doctor import data_path
from planner_doctor.planner import PlannerConfig
from planner_doctor.scenario import load_scenario

INITIAL_ID = "V_0.0_20.0_Vstep_4.0_SA_-1.066_1.066_SAstep_0.18_T_0.5_Model_BMW_320i"
CATALOG_IDS = (
    "V_0.0_20.0_Vstep_1.0_SA_-1.066_1.066_SAstep_2.13_T_0.5_Model_BMW_320i",
    "V_0.0_20.0_Vstep_2.0_SA_-1.066_1.066_SAstep_0.18_T_0.5_Model_BMW_320i",
)
REPAIRED_ID = "V_0.0_20.0_Vstep_2.0_SA_-1.066_1.066_SAstep_0.18_T_0.5_Model_BMW_320i"


@pytest.fixture(scope="session")
def fixture_scenario():
    return load_scenario(data_path("intersection.json"))


@pytest.fixture(scope="session")
def initial_config():
    return PlannerConfig.from_text(data_path("initial_heuristic.txt").read_text(), INITIAL_ID)


@pytest.fixture(scope="session")
def repaired_config():
    return PlannerConfig.from_text(data_path("repaired_heuristic.txt").read_text(), REPAIRED_ID)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
