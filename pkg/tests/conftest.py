import warnings

from hypothesis import settings

# numba's first call compiles, which would trip hypothesis deadlines
settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

warnings.filterwarnings("ignore", message=".*TBB.*")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
