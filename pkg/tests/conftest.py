import numpy as np
import pytest
from hypothesis import settings

# Seeded, reproducible property runs.
settings.register_profile("seeded", derandomize=True, deadline=None, max_examples=60,
                          print_blob=True)
settings.load_profile("seeded")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# Acceptance verdicts, filled by tests/test_acceptance.py and printed once at
# the end of the session.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
N_CRITERIA = 9


@pytest.fixture(scope="session")
def acceptance():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    ran = any("test_acceptance" in r.nodeid for rs in terminalreporter.stats.values()
              for r in rs if hasattr(r, "nodeid"))
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        ok, detail = ACCEPTANCE.get(n, (False, "not completed"))
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")
