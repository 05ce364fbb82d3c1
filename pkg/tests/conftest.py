from __future__ import annotations

import numpy as np
import pytest

from fairhms import load_csv

TABLE1 = """id,gender,race,lsat,gpa
a1,Female,Black,164,3.31
a2,Male,Black,163,3.55
a3,Female,White,165,3.09
a4,Male,White,160,3.83
a5,Male,Hispanic,170,2.79
a6,Female,Hispanic,161,3.69
a7,Male,Asian,153,3.89
a8,Female,Asian,156,3.87
"""


@pytest.fixture
def table1_path(tmp_path):
    path = tmp_path / "lsat.csv"
    path.write_text(TABLE1, encoding="utf-8")
    return path


@pytest.fixture
def table1(table1_path):
    """Raw (unscaled) admissions table grouped by gender."""
    return load_csv(table1_path, group_column="gender")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the run."""
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda text: int(text.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
