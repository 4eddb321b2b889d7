import pytest

ACCEPTANCE = {}


@pytest.fixture
def report(request):
    """Record and print one pass/fail line for an acceptance criterion."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def _report(criterion, passed, detail):
        line = f"[acceptance {criterion:>2}] {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE[criterion] = line
        with capman.global_and_fixture_disabled():
            print("\n" + line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
