import numpy as np
import pytest

from rank3id.tensor import DenseTensor, outer


def e(i, n=2):
    v = np.zeros(n, dtype=complex)
    v[i] = 1
    return v


@pytest.fixture
def W():
    return DenseTensor(outer([e(0), e(0), e(1)]) + outer([e(0), e(1), e(0)]) + outer([e(1), e(0), e(0)]))


@pytest.fixture
def diag222():
    return DenseTensor(outer([e(0), e(0), e(0)]) + outer([e(1), e(1), e(1)]))


ACCEPTANCE: dict = {}


def record(criterion, name, ok, detail, warning=""):
    """Store one acceptance line; parts of a criterion are merged at the end."""
    ACCEPTANCE.setdefault(criterion, []).append((name, bool(ok), detail, warning))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        ok = all(p[1] for p in parts)
        name = parts[0][0]
        detail = "; ".join(p[2] for p in parts)
        warn = "; ".join(p[3] for p in parts if p[3])
        line = f"criterion {crit:>2} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
        if warn:
            line += f" WARNING: {warn}"
        tr.write_line(line)
