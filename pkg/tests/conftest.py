import pytest

from elastic_mining.equilibrium import MarketParams

REF_B = 169_441.0
REF_C = 1.31


@pytest.fixture
def ref_params():
    return MarketParams(REF_B, REF_C, 0.25 * REF_B / REF_C, 1.0)


def share_params(share, gamma=1.0, b=REF_B, c=REF_C):
    return MarketParams(b, c, share * b / c, gamma)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
