import numpy as np
import pytest

from torusdiff.circular import Uniform, VonMises, VonMisesMixture, WrappedCauchy


def circular_zoo():
    """One member of every circular family, used by parametrized tests."""
    return {
        "uniform": Uniform(),
        "von_mises": VonMises(1.0, 2.0),
        "wrapped_cauchy": WrappedCauchy(4.0, 0.4),
        "mixture": VonMisesMixture([0.3, 0.7], [0.5, 3.5], [4.0, 1.5]),
    }


@pytest.fixture(params=list(circular_zoo()))
def circular_density(request):
    return circular_zoo()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo checks")


ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance(request, capsys):
    """Record and print the verdict line of an acceptance criterion."""

    def report(number, passed, detail):
        line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES[number] = line
        with capsys.disabled():
            print("\n" + line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
