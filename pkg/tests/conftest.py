import pytest

from tesfake import calibrate_thresholds, load_profile


@pytest.fixture(scope="session")
def detector():
    return load_profile()


@pytest.fixture(scope="session")
def calibration_run(detector):
    # mean of one absorbed photon per pulse at 1550 nm
    return detector.weak_coherent_run(1.0 / detector.params.coupling_efficiency, 1550e-9, 10_000, 11)


@pytest.fixture(scope="session")
def thresholds_1550(calibration_run):
    _, v = calibration_run
    return calibrate_thresholds(v, 3)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
