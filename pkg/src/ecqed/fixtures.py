"""Bundled data: the 8-dialog RECCON-format fixture and the two case-study dialogs."""

from __future__ import annotations

import json
from collections import Counter
from importlib import resources

from .corpus import ingest_source_dir, quad

DATA = resources.files("ecqed") / "data"


def fixture_source_dir():
    return DATA / "reccon_fixture"


def fixture_manifest():
    return json.loads((DATA / "fixture_manifest.json").read_text(encoding="utf-8"))


def load_fixture(counters=None):
    """Parse the bundled fixture; returns the dialogs in file order."""
    counters = counters if counters is not None else Counter()
    dialogs, failures = ingest_source_dir(fixture_source_dir(), counters)
    if failures:
        raise RuntimeError(f"bundled fixture failed to parse: {failures}")
    return dialogs


def _quads(rows):
    return frozenset(quad(*row) for row in rows)


# case-study dialog 1: gold and the two ablated systems' outputs
CASE_STUDY_DIALOG1_ID = "te_case_study_1"
CASE_STUDY_DIALOG1_GOLD = _quads([(1, 1, "SU", "N"), (2, 1, "SA", "I"), (3, 2, "AG", "I"), (5, 3, "AG", "H"), (6, 4, "SA", "S")])
CASE_STUDY_DIALOG1_NO_SSHG = _quads([(1, 1, "AG", "N"), (2, 1, "SA", "I"), (3, 2, "AG", "I"), (5, 3, "AG", "S"), (6, 4, "SA", "S")])
CASE_STUDY_DIALOG1_NO_PARALLEL = _quads([(2, 1, "SA", "I"), (3, 2, "AG", "I"), (5, 4, "SA", "I")])

CASE_STUDY_DIALOG2_ID = "te_case_study_2"
CASE_STUDY_DIALOG2_GOLD = _quads([(1, 1, "AG", "N"), (2, 1, "SA", "I"), (3, 1, "AG", "S")])
CASE_STUDY_DIALOG2_NO_SSHG = _quads([(1, 1, "SA", "N"), (2, 1, "SA", "I"), (3, 1, "AG", "S")])
CASE_STUDY_DIALOG2_NO_PARALLEL = _quads([(2, 1, "SA", "I"), (3, 2, "AG", "I")])
