import pytest

ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for an acceptance criterion, then assert it."""
    lines = request.config.stash[ACCEPTANCE]

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[request.node.nodeid] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    failed = terminalreporter.stats.get("failed", [])
    for rep in failed:
        if "test_acceptance" in rep.nodeid and rep.nodeid not in lines:
            name = rep.nodeid.split("::")[-1]
            lines[rep.nodeid] = f"criterion {name.split('_')[2]:>2}: FAIL  raised before completing ({name})"
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines.items(), key=lambda kv: kv[1]):
            terminalreporter.write_line(line)
