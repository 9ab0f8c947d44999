import pytest

from orbitsched.formula import Backbone, DnfFormula, Filter, FilterCatalog


def make_catalog(probs, times=None, backbones=None, bb_times=None, tpr=0.95, fpr=0.05):
    """Filters 1..n with the given pass probabilities."""
    times = times or [1.0] * len(probs)
    backbones = backbones or [None] * len(probs)
    bbs = [Backbone(b, t) for b, t in (bb_times or {}).items()]
    filters = [Filter(i + 1, times[i], probs[i], tpr, fpr, backbones[i]) for i in range(len(probs))]
    return FilterCatalog(filters, bbs)


@pytest.fixture
def catalog3():
    return make_catalog([0.5, 0.4, 0.2])


F = DnfFormula.of


# one line per acceptance criterion, echoed in the terminal summary
VERDICTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[n])
