import pytest


@pytest.fixture(scope="session")
def emit_line(request):
    """Write a line to the terminal even while pytest captures output."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(line: str) -> None:
        if reporter is not None:
            reporter.ensure_newline()
            reporter.write_line(line)
        else:
            print(line)

    return emit
