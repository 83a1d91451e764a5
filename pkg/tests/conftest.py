import pytest

from nmorsim.scenarios import preset, run

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def preset_run(tmp_path_factory):
    """Run a preset once per session; returns its Bundle."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run(preset(name), tmp_path_factory.mktemp(f"run_{name}"))
        return cache[name]

    return get


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
