"""Shared fixtures and the acceptance-criteria summary reporter."""

import numpy as np
import pytest

from shiftrc import integrate_chaotic, lorenz_params, standardize

ACCEPTANCE_RESULTS = []


def record_criterion(num: int, name: str, seconds: float, passed: bool,
                     detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((num, name, seconds, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num, name, seconds, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        line = f"criterion {num:2d}: {status} ({seconds:7.1f} s)  {name}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def lorenz_drive_short():
    """Standardized Lorenz x drive, 900 samples, short transient."""
    params = lorenz_params(transient_samples=200)
    series = integrate_chaotic(params, (1.0, 1.0, 1.0), 900)
    drive, _ = standardize(series[:, 0])
    drive.setflags(write=False)
    return drive


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20230117)
