import numpy as np
import pytest

from treatreg.data import DataTable

CONTROLS = [f"c{j}" for j in range(1, 9)]

BASE_DESIGN = {
    "response": "outcome",
    "treatment": "policy",
    "controls": CONTROLS,
    # 48 states x 13 years; one extra year level is dropped to reach 66 controls
    "dummies": ["state", {"column": "year", "drop": ["1997"]}],
    "standardize": True,
}

AUGMENTED_DESIGN = dict(
    BASE_DESIGN,
    interactions=[
        {"columns": "controls", "time": "year", "trend": "linear", "center_time": True},
        {"columns": "controls", "time": "year", "trend": "quadratic", "center_time": True},
        {"columns": "state", "time": "year", "trend": "linear", "center_time": True},
        {"columns": "state", "time": "year", "trend": "quadratic", "center_time": True},
    ],
)


def make_panel(seed=0, n_states=48, years=range(1985, 1998)) -> DataTable:
    """Synthetic 48-state by 13-year panel with 8 controls."""
    rng = np.random.default_rng(seed)
    years = list(years)
    states = [f"S{i:02d}" for i in range(n_states)]
    state_col = np.array([s for s in states for _ in years], dtype=object)
    year_col = np.array([float(y) for _ in states for y in years])
    n = len(year_col)
    cols = {"state": state_col, "year": year_col}
    state_eff = dict(zip(states, rng.normal(size=n_states)))
    for c in CONTROLS:
        cols[c] = rng.normal(size=n) + 0.3 * np.array([state_eff[s] for s in state_col])
    X = np.column_stack([cols[c] for c in CONTROLS])
    cols["policy"] = X @ rng.normal(scale=0.3, size=len(CONTROLS)) + rng.normal(size=n)
    cols["outcome"] = -0.1 * cols["policy"] + X @ rng.normal(scale=0.2, size=len(CONTROLS)) + rng.normal(size=n)
    order = ["outcome", "policy", *CONTROLS, "state", "year"]
    return DataTable(tuple(order), {k: cols[k] for k in order})


@pytest.fixture(scope="session")
def panel():
    return make_panel()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# one pass/fail line per acceptance criterion, echoed at the end of the run

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    def record(criterion: str, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
