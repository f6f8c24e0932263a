ACCEPTANCE_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criterion check")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
