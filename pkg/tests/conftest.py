import pytest

_LINES = pytest.StashKey[list]()


class Criterion:
    """Collects the named checks of one acceptance criterion."""

    def __init__(self):
        self.number = None
        self.title = ""
        self.checks = []

    def __call__(self, number, title):
        self.number, self.title = number, title
        return self

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))
        print(f"  [{'ok' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
        return bool(ok)

    def done(self):
        bad = [f"{n} ({d})" if d else n for n, ok, d in self.checks if not ok]
        assert not bad, "failed checks: " + "; ".join(bad)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


@pytest.fixture
def criterion(request):
    crit = Criterion()
    yield crit
    if crit.number is None:
        return
    rep = getattr(request.node, "rep_call", None)
    passed = rep is not None and rep.passed
    n_ok = sum(ok for _, ok, _ in crit.checks)
    line = f"{'PASS' if passed else 'FAIL'}  criterion {crit.number:>2}  {crit.title}  ({n_ok}/{len(crit.checks)} checks)"
    request.config.stash.setdefault(_LINES, []).append(line)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
