import os
from pathlib import Path

import pytest

ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one status line per acceptance criterion; printed in the summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number: int, status: str, text: str):
        line = f"criterion {number}: {status} - {text}"
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def _wdbc_from_sklearn(path: Path):
    datasets = pytest.importorskip("sklearn.datasets")
    bunch = datasets.load_breast_cancer()
    with open(path, "w") as fh:
        for i, (row, target) in enumerate(zip(bunch.data, bunch.target)):
            label = "M" if bunch.target_names[target] == "malignant" else "B"
            fh.write(",".join([str(900000 + i), label, *(repr(float(v)) for v in row)]) + "\n")
    return path


@pytest.fixture(scope="session")
def wdbc_path(tmp_path_factory):
    """UCI wdbc.data from IRMA_WDBC_PATH, else rebuilt from the scikit-learn copy."""
    env = os.environ.get("IRMA_WDBC_PATH")
    if env:
        return Path(env)
    return _wdbc_from_sklearn(tmp_path_factory.mktemp("wdbc") / "wdbc.data")
