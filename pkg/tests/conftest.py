import os
import sys

sys.path.insert(0, os.path.dirname(__file__))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        crit = results[n]
        terminalreporter.write_line(crit.line())
        for p in crit.parts:
            terminalreporter.write_line(f"    {'ok ' if p.passed else 'BAD'} {p.name}: {p.detail}")
