import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from teleqos import CbrAggregate, FlowSpec, NetworkParams, ScenarioConfig

MBPS = 1e6 / 8.0

# one verdict line per acceptance criterion, printed after the run
ACCEPTANCE_VERDICTS: dict[int, tuple[bool, str]] = {}


def record_acceptance(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_VERDICTS[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE_VERDICTS):
        passed, detail = ACCEPTANCE_VERDICTS[criterion]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {criterion}: {verdict} -- {detail}")


@pytest.fixture
def base_net() -> NetworkParams:
    """6 Mbps link, 8 ms one-way delay, 14 kB queue, 578 B TCP packets."""
    return NetworkParams(mu=6 * MBPS, tau=8e-3, buf=14000.0, s_tcp=578.0, n_ack=1)


@pytest.fixture
def base_flows() -> tuple[FlowSpec, ...]:
    return (
        FlowSpec(name="media", kind="telehaptic", rate=1.096 * MBPS, packet=137.0, gap=1e-3),
        FlowSpec(name="bulk", kind="tcp"),
        FlowSpec(name="cross", kind="cbr", rate=1.904 * MBPS, packet=150.0),
    )


@pytest.fixture
def base_scenario(base_net, base_flows) -> ScenarioConfig:
    return ScenarioConfig(net=base_net, flows=base_flows, duration=30.0, warmup=10.0)


def cbr(rate_bps: float) -> CbrAggregate:
    return CbrAggregate(rate_bps)
