"""Conversion between quadruple sets and tag grids.

Grids are indexed ``[cause, emotion]`` with 0-based positions, so the cell for
quadruple ``(u6, u4, sadness, S)`` is ``grids["sadness"][3, 5]``. Only the upper
triangle (cause <= emotion) may hold a tag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CAUSE_ABBREV, CAUSE_TYPES, EMOTION_ABBREV, EMOTIONS, Dialog, Quadruple
from .errors import DecodeError, InvariantError

NONE = "NONE"
# Index 0 is the "no relation" tag; the others follow CAUSE_TYPES order.
TAGS = (NONE, "H", "I", "N", "S")
TAG_INDEX = {t: i for i, t in enumerate(TAGS)}
CAUSE_TO_TAG = {c: CAUSE_ABBREV[c] for c in CAUSE_TYPES}
TAG_TO_CAUSE = {v: k for k, v in CAUSE_TO_TAG.items()}

ONE_GRID_TAGS = (NONE,) + tuple(
    f"{EMOTION_ABBREV[e]}-{CAUSE_ABBREV[c]}" for e in EMOTIONS for c in CAUSE_TYPES
)
ONE_GRID_INDEX = {t: i for i, t in enumerate(ONE_GRID_TAGS)}
_ABBREV_TO_EMOTION = {v: k for k, v in EMOTION_ABBREV.items()}


def valid_cell_mask(n):
    """Boolean ``n x n`` mask of cells with cause <= emotion."""
    return np.triu(np.ones((n, n), dtype=bool))


def _dialog_quads(d):
    if isinstance(d, Dialog):
        return len(d.utterances), list(d.quadruples)
    n, quads = d
    return n, list(quads)


@dataclass
class TagGridSet:
    n: int
    grids: dict  # emotion type -> (n, n) int array of TAGS indices

    @classmethod
    def empty(cls, n):
        return cls(n, {e: np.zeros((n, n), dtype=np.int64) for e in EMOTIONS})

    def tag(self, emotion, cause_idx, emotion_idx):
        """Tag string at 1-based (cause, emotion) position."""
        return TAGS[self.grids[emotion][cause_idx - 1, emotion_idx - 1]]

    def as_array(self):
        """Stack into an ``(n, n, 6)`` array in canonical emotion order."""
        return np.stack([self.grids[e] for e in EMOTIONS], axis=-1)

    @classmethod
    def from_array(cls, arr):
        return cls(arr.shape[0], {e: np.asarray(arr[..., k], dtype=np.int64) for k, e in enumerate(EMOTIONS)})

    def check(self):
        lower = ~valid_cell_mask(self.n)
        for e, g in self.grids.items():
            if g.shape != (self.n, self.n):
                raise InvariantError(f"grid {e} has shape {g.shape}, expected {(self.n, self.n)}")
            if np.any(g[lower] != 0):
                raise InvariantError(f"grid {e} has a tag below the diagonal")
        return self

    def to_json(self):
        return {
            "n": self.n,
            "grids": {
                e: [[int(r) + 1, int(c) + 1, TAGS[g[r, c]]] for r, c in zip(*np.nonzero(g))]
                for e, g in self.grids.items()
            },
        }

    @classmethod
    def from_json(cls, obj):
        out = cls.empty(int(obj["n"]))
        for e, cells in obj["grids"].items():
            for r, c, t in cells:
                out.grids[e][r - 1, c - 1] = TAG_INDEX[t]
        return out


@dataclass
class OneGridTagging:
    n: int
    grid: np.ndarray  # (n, n) int array of ONE_GRID_TAGS indices

    def tag(self, cause_idx, emotion_idx):
        return ONE_GRID_TAGS[self.grid[cause_idx - 1, emotion_idx - 1]]

    def to_json(self):
        return {
            "n": self.n,
            "grid": [[int(r) + 1, int(c) + 1, ONE_GRID_TAGS[self.grid[r, c]]] for r, c in zip(*np.nonzero(self.grid))],
        }


def encode_grids(d) -> TagGridSet:
    """Place every quadruple of ``d`` in the grid of its emotion type.

    ``d`` is a :class:`Dialog` or an ``(n, quadruples)`` pair.
    """
    n, quads = _dialog_quads(d)
    out = TagGridSet.empty(n)
    for q in quads:
        if not (1 <= q.cause_idx <= q.emotion_idx <= n):
            raise InvariantError(f"quadruple {q.short()} violates 1 <= cause <= emotion <= {n}")
        out.grids[q.emotion_type][q.cause_idx - 1, q.emotion_idx - 1] = TAG_INDEX[CAUSE_TO_TAG[q.cause_type]]
    return out


def decode_grids(g: TagGridSet) -> set:
    """One quadruple per tagged upper-triangle cell."""
    mask = valid_cell_mask(g.n)
    out = set()
    for e, grid in g.grids.items():
        for r, c in zip(*np.nonzero((grid != 0) & mask)):
            out.add(Quadruple(int(c) + 1, int(r) + 1, e, TAG_TO_CAUSE[TAGS[grid[r, c]]]))
    return out


def encode_one_grid(d):
    """Composite-tag encoding on a single grid; returns ``(tagging, conflict_count)``.

    A cell holds one tag only, so when two quadruples share a cell the one whose
    emotion type sorts first is kept and the rest are counted as conflicts.
    """
    n, quads = _dialog_quads(d)
    grid = np.zeros((n, n), dtype=np.int64)
    conflicts = 0
    for q in sorted(quads, key=lambda q: (q.emotion_type, q.cause_type, q.emotion_idx, q.cause_idx)):
        if not (1 <= q.cause_idx <= q.emotion_idx <= n):
            raise InvariantError(f"quadruple {q.short()} violates 1 <= cause <= emotion <= {n}")
        r, c = q.cause_idx - 1, q.emotion_idx - 1
        if grid[r, c] != 0:
            conflicts += 1
            continue
        grid[r, c] = ONE_GRID_INDEX[f"{EMOTION_ABBREV[q.emotion_type]}-{CAUSE_ABBREV[q.cause_type]}"]
    return OneGridTagging(n, grid), conflicts


def split_composite(tag):
    try:
        emo, cause = tag.split("-")
        return _ABBREV_TO_EMOTION[emo], TAG_TO_CAUSE[cause]
    except (ValueError, KeyError):
        raise DecodeError(f"unknown composite tag {tag!r}") from None


def decode_one_grid(g: OneGridTagging) -> set:
    mask = valid_cell_mask(g.n)
    out = set()
    for r, c in zip(*np.nonzero((g.grid != 0) & mask)):
        idx = int(g.grid[r, c])
        if not 0 < idx < len(ONE_GRID_TAGS):
            raise DecodeError(f"unknown composite tag index {idx}")
        emotion, cause = split_composite(ONE_GRID_TAGS[idx])
        out.add(Quadruple(int(c) + 1, int(r) + 1, emotion, cause))
    return out


def one_grid_from_tags(n, cells):
    """Build a one-grid tagging from ``{(cause_idx, emotion_idx): "SU-N"}``."""
    grid = np.zeros((n, n), dtype=np.int64)
    for (r, c), tag in cells.items():
        if tag not in ONE_GRID_INDEX:
            raise DecodeError(f"unknown composite tag {tag!r}")
        grid[r - 1, c - 1] = ONE_GRID_INDEX[tag]
    return OneGridTagging(n, grid)
