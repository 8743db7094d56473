from collections import Counter

import pytest

from ecqed.corpus import Dialog, Utterance, quad
from ecqed.fixtures import CASE_STUDY_DIALOG1_GOLD, load_fixture


@pytest.fixture(scope="session")
def fixture_dialogs():
    return load_fixture()


@pytest.fixture(scope="session")
def fixture_counters():
    counters = Counter()
    load_fixture(counters)
    return counters


@pytest.fixture
def case_study_dialog1(fixture_dialogs):
    (d,) = [d for d in fixture_dialogs if d.dialog_id == "te_case_study_1"]
    assert d.quad_set == CASE_STUDY_DIALOG1_GOLD
    return d


def make_dialog(n, quads=(), speakers="AB", dialog_id="d", split="train", labels=None):
    """Synthetic dialog whose emotion utterances carry the labels their quadruples need."""
    quads = [q if not isinstance(q, tuple) else quad(*q) for q in quads]
    labels = dict(labels or {})
    for q in quads:
        labels.setdefault(q.emotion_idx, q.emotion_type)
    utts = tuple(
        Utterance(i, speakers[(i - 1) % len(speakers)], f"utterance number {i}", labels.get(i, "neutral"))
        for i in range(1, n + 1)
    )
    return Dialog(dialog_id, utts, tuple(quads), split)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
