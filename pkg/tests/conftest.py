"""Shared pytest wiring: per-criterion PASS/FAIL summary for the acceptance
suite (tests/test_acceptance.py, tests named test_criterion_NN_*)."""

import re

import pytest

CRITERIA = {
    1: "illumination invariance: preprocessed NCC >= 0.95, raw <= 0.85",
    2: "normalized gradients scale-invariant within 1e-12",
    3: "iterative integration matches the dense solve within 1e-3",
    4: "Fourier identities (Parseval, shift, magnitude/phase values)",
    5: "linear KPCA and both PCA routes agree within 1e-8",
    6: "self-match: zero distance, accepted at tau 0.85, own gallery index",
    7: "fused AUC >= best single classifier AUC - 0.005",
    8: "VR at FAR 1% and genuine mean: preprocessing on >= off",
    9: "ROC points match the exhaustive threshold sweep exactly",
    10: "synth -> train -> evaluate reruns are byte-identical",
}

_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d{2})_")
_outcomes: dict[int, str] = {}
ACCEPTANCE_NOTES: dict[int, str] = {}


@pytest.fixture
def acceptance_note():
    """Lets a criterion test attach measured numbers to its summary line."""

    def set_note(num: int, text: str) -> None:
        ACCEPTANCE_NOTES[num] = text

    return set_note


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m:
        return
    num = int(m.group(1))
    if report.skipped:
        _outcomes[num] = "SKIP"
    elif report.when == "call":
        _outcomes[num] = "PASS" if report.passed else "FAIL"
    elif report.failed:
        _outcomes[num] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        outcome = _outcomes.get(num, "NOT RUN")
        line = f"criterion {num:2d}: {outcome} - {CRITERIA[num]}"
        note = ACCEPTANCE_NOTES.get(num)
        if note:
            line += f" [{note}]"
        terminalreporter.write_line(line)
