import math
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from dtcforge import dicke  # noqa: E402

# acceptance lines collected by tests/test_acceptance.py, printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
# worst |j.j - 1/4| over every Dicke trajectory integrated with dt <= 2 pi / 1000
SPIN_LENGTH = {"max": 0.0, "count": 0}

_evolve = dicke.evolve


def _recording_evolve(initial, params, pulse, t_end, dt, *args, **kwargs):
    traj = _evolve(initial, params, pulse, t_end, dt, *args, **kwargs)
    if dt <= 2 * math.pi / 1000 * (1 + 1e-12):
        SPIN_LENGTH["max"] = max(SPIN_LENGTH["max"], dicke.spin_length_error(traj))
        SPIN_LENGTH["count"] += 1
    return traj


@pytest.fixture(autouse=True, scope="session")
def record_spin_length():
    dicke.evolve = _recording_evolve
    yield
    dicke.evolve = _evolve


def pytest_sessionfinish(session, exitstatus):
    # criterion 3 covers every Dicke trajectory of the session, not only those of its own test
    if 3 in ACCEPTANCE and SPIN_LENGTH["count"]:
        ok = SPIN_LENGTH["max"] < 1e-6
        ACCEPTANCE[3] = (ok, f"max|j.j-1/4|={SPIN_LENGTH['max']:.1e} over all {SPIN_LENGTH['count']} "
                             "trajectories integrated in this session")
        if not ok and session.exitstatus == 0:
            session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    if SPIN_LENGTH["count"]:
        terminalreporter.write_line(
            f"spin-length check over {SPIN_LENGTH['count']} trajectories (dt <= T/1000): "
            f"max |j.j - 1/4| = {SPIN_LENGTH['max']:.3e}"
        )
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            ok, detail = ACCEPTANCE[k]
            terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
