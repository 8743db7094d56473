import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecqed.corpus import CAUSE_TYPES, EMOTIONS, Quadruple, quad
from ecqed.errors import DecodeError, InvariantError
from ecqed.fixtures import CASE_STUDY_DIALOG1_GOLD
from ecqed.gridcodec import (
    ONE_GRID_TAGS,
    TAG_INDEX,
    TagGridSet,
    decode_grids,
    decode_one_grid,
    encode_grids,
    encode_one_grid,
    one_grid_from_tags,
)

from conftest import make_dialog


@st.composite
def valid_dialogs(draw, max_n=12, max_quads=10):
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(0, max_quads))
    quads = {}
    for _ in range(k):
        e = draw(st.integers(1, n))
        c = draw(st.integers(1, e))
        emo = draw(st.sampled_from(EMOTIONS))
        quads.setdefault((e, c, emo), Quadruple(e, c, emo, draw(st.sampled_from(CAUSE_TYPES))))
    return n, frozenset(quads.values())


def nonempty_cells(g):
    return {(e, int(r) + 1, int(c) + 1, g.tag(e, int(r) + 1, int(c) + 1)) for e, grid in g.grids.items() for r, c in zip(*np.nonzero(grid))}


def test_single_quadruple_cell():
    g = encode_grids((6, [quad(6, 4, "sadness", "self-contagion")]))
    assert g.tag("sadness", 4, 6) == "S"
    assert len(nonempty_cells(g)) == 1


def test_empty_quadruples_give_all_none():
    g = encode_grids((4, []))
    assert set(g.grids) == set(EMOTIONS)
    assert all(not grid.any() for grid in g.grids.values())
    assert decode_grids(g) == set()


def test_case_study_cells(case_study_dialog1):
    g = encode_grids(case_study_dialog1)
    expected = {
        ("surprise", 1, 1, "N"),
        ("sadness", 1, 2, "I"),
        ("sadness", 4, 6, "S"),
        ("anger", 2, 3, "I"),
        ("anger", 3, 5, "H"),
    }
    assert nonempty_cells(g) == expected
    assert decode_grids(g) == CASE_STUDY_DIALOG1_GOLD


def test_overlapping_cell_across_grids():
    g = TagGridSet.empty(3)
    g.grids["anger"][0, 1] = TAG_INDEX["I"]
    g.grids["sadness"][0, 1] = TAG_INDEX["S"]
    assert decode_grids(g) == {quad(2, 1, "anger", "inter-personal"), quad(2, 1, "sadness", "self-contagion")}


def test_encode_rejects_triangular_violation():
    with pytest.raises(InvariantError):
        encode_grids((3, [Quadruple(1, 2, "anger", "hybrid")]))
    bad = TagGridSet.empty(3)
    bad.grids["fear"][2, 0] = 1
    with pytest.raises(InvariantError):
        bad.check()


@given(valid_dialogs())
@settings(max_examples=300, deadline=None)
def test_round_trip_and_cell_count(case):
    n, quads = case
    g = encode_grids((n, quads)).check()
    decoded = decode_grids(g)
    assert decoded == quads
    assert len(decoded) == sum(int((grid != 0).sum()) for grid in g.grids.values())
    for q in decoded:
        assert 1 <= q.cause_idx <= q.emotion_idx <= n
    assert len({q.triple for q in decoded}) == len(decoded)


@given(valid_dialogs())
@settings(max_examples=300, deadline=None)
def test_one_grid_round_trip_exact_iff_no_conflict(case):
    n, quads = case
    tagging, conflicts = encode_one_grid((n, quads))
    decoded = decode_one_grid(tagging)
    assert (decoded == set(quads)) == (conflicts == 0)
    assert len(decoded) == len(quads) - conflicts


def test_one_grid_composite_tag():
    tagging, conflicts = encode_one_grid((2, [quad(1, 1, "surprise", "no-context")]))
    assert tagging.tag(1, 1) == "SU-N" and conflicts == 0
    assert decode_one_grid(one_grid_from_tags(2, {(1, 1): "SU-N"})) == {quad(1, 1, "surprise", "no-context")}


def test_one_grid_conflict_keeps_alphabetically_first():
    tagging, conflicts = encode_one_grid((3, [quad(3, 1, "sadness", "I"), quad(3, 1, "anger", "I")]))
    assert conflicts == 1
    assert decode_one_grid(tagging) == {quad(3, 1, "anger", "I")}


def test_one_grid_empty_and_unknown_tag():
    tagging, conflicts = encode_one_grid((4, []))
    assert conflicts == 0 and decode_one_grid(tagging) == set()
    with pytest.raises(DecodeError):
        one_grid_from_tags(2, {(1, 2): "XX-Q"})
    assert len(ONE_GRID_TAGS) == 25


def test_grid_json_round_trip(case_study_dialog1):
    g = encode_grids(case_study_dialog1)
    obj = g.to_json()
    assert obj["grids"]["sadness"] == [[1, 2, "I"], [4, 6, "S"]]
    back = TagGridSet.from_json(obj)
    assert decode_grids(back) == CASE_STUDY_DIALOG1_GOLD


def test_one_grid_equals_multi_grid_on_conflict_free_dialog(case_study_dialog1):
    tagging, conflicts = encode_one_grid(case_study_dialog1)
    assert conflicts == 0
    assert decode_one_grid(tagging) == decode_grids(encode_grids(case_study_dialog1))
