import math

import pytest

from spacebatch import scenarios


@pytest.fixture
def baseline_n16():
    return scenarios.baseline(16, 50, 6, 80.0, node_mean_snr=30.0)


@pytest.fixture
def single_server():
    """One node, one rate: the queue is M/D/1/K-like and the chain is exact."""
    return scenarios.baseline(1, 25, 1, 20.0, rates=(24e6,), snr_thresholds=(math.inf,))


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) != "call":
                continue
            for key, value in getattr(rep, "user_properties", ()):
                if key == "criterion":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: (int(s.split()[1].split("(")[0].rstrip(":")), s)):
            terminalreporter.write_line(line)
