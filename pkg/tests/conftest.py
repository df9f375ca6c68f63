import numpy as np
import pytest

from mixlr import (
    FrequencyTable,
    Genotype,
    Peak,
    Profile,
    Proposition,
    RareAllelePolicy,
)
from mixlr.model import HD, HP

# One line per acceptance criterion, filled in by tests/test_acceptance.py and
# echoed after the run (terminal-summary output is never captured).
ACCEPTANCE_REPORT: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)


@pytest.fixture
def toy_profile():
    """Two peaks at one locus: A at 1000 rfu, B at 1100 rfu."""
    return Profile({"L": [Peak("A", 1000.0), Peak("B", 1100.0)]}, analytical_threshold=50.0)


@pytest.fixture
def toy_table():
    return FrequencyTable({"L": {"A": 0.4, "B": 0.4}}, n_individuals=500)


@pytest.fixture
def policy():
    return RareAllelePolicy.five_over_2n()


@pytest.fixture
def toy_hp():
    """POI homozygous BB plus one unknown contributor."""
    return Proposition(noc=2, fixed_contributors={1: {"L": Genotype("B", "B")}}, label=HP)


@pytest.fixture
def toy_hd():
    """A single unknown contributor."""
    return Proposition(noc=1, label=HD)


def study_table(n_loci=4, freqs=(0.30, 0.25, 0.20, 0.15, 0.08)):
    """Small multi-locus frequency table for simulation studies."""
    return FrequencyTable(
        {
            f"L{i}": {str(10 + a): f for a, f in enumerate(freqs)}
            for i in range(n_loci)
        },
        n_individuals=500,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
