import time

import pytest

from hfpa.calibrate import REFERENCE_ANCHORS, default_init, fit


@pytest.fixture(scope="session")
def fitted():
    """Calibrated parameters plus the wall time the calibration took.

    Session-scoped: the acceptance suite and several module tests share one
    deterministic fit against the bench reference table.
    """
    t0 = time.perf_counter()
    init = default_init(REFERENCE_ANCHORS)
    report = fit(REFERENCE_ANCHORS, init, budget=600)
    seconds = time.perf_counter() - t0
    return report, seconds


@pytest.fixture(scope="session")
def fitted_params(fitted):
    report, _ = fitted
    return report.params
