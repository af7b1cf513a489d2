import acceptance_log


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.lines:
            terminalreporter.write_line(line)
