import _acceptance


def pytest_terminal_summary(terminalreporter):
    if _acceptance.LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(_acceptance.LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
