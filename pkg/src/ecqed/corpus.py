"""Dialog data model, RECCON ingestion, validation and corpus statistics."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable

from .errors import ParseError

# Alphabetical order is the canonical grid order everywhere.
EMOTIONS = ("anger", "disgust", "fear", "happiness", "sadness", "surprise")
UTTERANCE_LABELS = EMOTIONS + ("neutral",)
CAUSE_TYPES = ("hybrid", "inter-personal", "no-context", "self-contagion")
SPLITS = ("train", "val", "test")

EMOTION_ABBREV = {
    "anger": "AG",
    "disgust": "DI",
    "fear": "FE",
    "happiness": "HA",
    "sadness": "SA",
    "surprise": "SU",
}
CAUSE_ABBREV = {
    "hybrid": "H",
    "inter-personal": "I",
    "no-context": "N",
    "self-contagion": "S",
}

_EMOTION_SYNONYMS = {
    "happy": "happiness",
    "happines": "happiness",
    "happiness": "happiness",
    "joy": "happiness",
    "excited": "happiness",
    "angry": "anger",
    "anger": "anger",
    "surprised": "surprise",
    "surprise": "surprise",
    "sad": "sadness",
    "sadness": "sadness",
    "disgusted": "disgust",
    "disgust": "disgust",
    "fear": "fear",
    "fearful": "fear",
    "scared": "fear",
    "neutral": "neutral",
    "no emotion": "neutral",
}

_CAUSE_SYNONYMS = {
    "hybrid": "hybrid",
    "inter-personal": "inter-personal",
    "interpersonal": "inter-personal",
    "inter personal": "inter-personal",
    "no-context": "no-context",
    "no context": "no-context",
    "nocontext": "no-context",
    "self-contagion": "self-contagion",
    "self contagion": "self-contagion",
    "selfcontagion": "self-contagion",
}

_SPLIT_SYNONYMS = {
    "train": "train",
    "training": "train",
    "val": "val",
    "valid": "val",
    "validation": "val",
    "dev": "val",
    "test": "test",
}


def normalize_emotion(label):
    """Map an emotion label or one of its synonyms to its canonical name, or None."""
    if label is None:
        return None
    return _EMOTION_SYNONYMS.get(str(label).strip().lower())


def normalize_cause_type(label):
    if label is None:
        return None
    return _CAUSE_SYNONYMS.get(re.sub(r"[_\s]+", " ", str(label).strip().lower()))


def normalize_split(label):
    if label is None:
        return None
    return _SPLIT_SYNONYMS.get(str(label).strip().lower())


@dataclass(frozen=True)
class Utterance:
    index: int
    speaker: str
    text: str
    emotion_label: str


@dataclass(frozen=True, order=True)
class Quadruple:
    emotion_idx: int
    cause_idx: int
    emotion_type: str
    cause_type: str

    @property
    def pair(self):
        return (self.emotion_idx, self.cause_idx)

    @property
    def triple(self):
        return (self.emotion_idx, self.cause_idx, self.emotion_type)

    def short(self):
        """Compact form used in tables, e.g. ``(u2,u1,SA,I)``."""
        return (
            f"(u{self.emotion_idx},u{self.cause_idx},"
            f"{EMOTION_ABBREV.get(self.emotion_type, self.emotion_type)},"
            f"{CAUSE_ABBREV.get(self.cause_type, self.cause_type)})"
        )


def quad(emotion_idx, cause_idx, emotion, cause):
    """Build a quadruple from full names or table abbreviations (``"SA"``, ``"I"``)."""
    emo_from_abbrev = {v: k for k, v in EMOTION_ABBREV.items()}
    cause_from_abbrev = {v: k for k, v in CAUSE_ABBREV.items()}
    emotion = emo_from_abbrev.get(emotion, emotion)
    cause = cause_from_abbrev.get(cause, cause)
    return Quadruple(int(emotion_idx), int(cause_idx), emotion, cause)


@dataclass(frozen=True)
class Dialog:
    dialog_id: str
    utterances: tuple
    quadruples: tuple = ()
    split: str = "train"

    def __len__(self):
        return len(self.utterances)

    @property
    def quad_set(self):
        return frozenset(self.quadruples)

    @property
    def speakers(self):
        """Distinct speakers in order of first appearance."""
        return tuple(dict.fromkeys(u.speaker for u in self.utterances))

    def with_quadruples(self, quadruples):
        return Dialog(self.dialog_id, self.utterances, tuple(quadruples), self.split)


# -- ingestion ---------------------------------------------------------------


def _structural_cause_type(utterances, emotion_idx, cause_idx):
    if emotion_idx == cause_idx:
        return "no-context"
    if utterances[emotion_idx - 1].speaker == utterances[cause_idx - 1].speaker:
        return "self-contagion"
    return "inter-personal"


def _assign_cause_types(utterances, emotion_idx, evidence, raw_types):
    """Give every (emotion, cause) evidence link one cause type.

    RECCON lists cause types per emotion utterance rather than per link. When the
    two lists align they are zipped; otherwise each link takes the type implied by
    its structure (same utterance, same speaker, other speaker) if that type was
    annotated, falls back to ``hybrid`` if annotated, and finally to the
    structural type.
    """
    types = [normalize_cause_type(t) for t in raw_types]
    if len(types) == len(evidence) and all(types):
        return types
    annotated = {t for t in types if t}
    if len(annotated) == 1 and len(types) == 1:
        return [types[0]] * len(evidence)
    out = []
    for cause_idx in evidence:
        structural = _structural_cause_type(utterances, emotion_idx, cause_idx)
        if structural in annotated or not annotated:
            out.append(structural)
        elif "hybrid" in annotated:
            out.append("hybrid")
        else:
            out.append(structural)
    return out


def _evidence_indices(value):
    if value is None:
        return []
    if isinstance(value, (int, str)):
        value = [value]
    out = []
    for item in value:
        if isinstance(item, bool):
            continue
        if isinstance(item, int):
            out.append(item)
        elif isinstance(item, str) and item.strip().isdigit():
            out.append(int(item.strip()))
        else:
            out.append(None)  # background ("b") or unparseable evidence
    return out


def parse_source_dialog(raw, counters=None):
    """Convert one RECCON-style record into a canonical :class:`Dialog`.

    ``raw`` holds ``dialog_id``, ``split`` and ``utterances``; each utterance
    carries ``turn``, ``speaker``, ``utterance``, ``emotion`` and optionally
    ``expanded emotion cause evidence`` and ``type``. Rejected annotations are
    tallied in ``counters`` (a :class:`collections.Counter`) when given.
    """
    counters = counters if counters is not None else Counter()
    dialog_id = str(raw.get("dialog_id", "<unknown>"))
    split = normalize_split(raw.get("split", "train"))
    if split is None:
        raise ParseError(dialog_id, "split", f"unknown split {raw.get('split')!r}")
    records = raw.get("utterances")
    if not isinstance(records, list) or not records:
        raise ParseError(dialog_id, "utterances", "missing or empty utterance list")
    # RECCON wraps each dialog in an extra list
    if len(records) == 1 and isinstance(records[0], list):
        records = records[0]

    utterances = []
    for pos, rec in enumerate(records, start=1):
        if not isinstance(rec, dict):
            raise ParseError(dialog_id, f"utterances[{pos}]", "not an object")
        turn = rec.get("turn", rec.get("index", pos))
        try:
            turn = int(turn)
        except (TypeError, ValueError):
            raise ParseError(dialog_id, f"utterances[{pos}].turn", f"bad index {turn!r}") from None
        if turn != pos:
            raise ParseError(dialog_id, f"utterances[{pos}].turn", f"non-contiguous index {turn}")
        speaker = rec.get("speaker")
        if speaker is None or not str(speaker).strip():
            raise ParseError(dialog_id, f"utterances[{pos}].speaker", "missing speaker")
        text = rec.get("utterance", rec.get("text"))
        if text is None or not str(text).strip():
            raise ParseError(dialog_id, f"utterances[{pos}].utterance", "missing or empty text")
        label = normalize_emotion(rec.get("emotion"))
        if label is None:
            raise ParseError(dialog_id, f"utterances[{pos}].emotion", f"unknown label {rec.get('emotion')!r}")
        utterances.append(Utterance(pos, str(speaker).strip(), str(text), label))

    quadruples = []
    seen = set()
    n = len(utterances)
    for utt, rec in zip(utterances, records):
        evidence = _evidence_indices(rec.get("expanded emotion cause evidence", rec.get("causes")))
        if not evidence:
            continue
        if utt.emotion_label == "neutral":
            counters["neutral_emotion_dropped"] += len(evidence)
            continue
        kept = []
        for cause_idx in evidence:
            if cause_idx is None:
                counters["background_cause_dropped"] += 1
            elif cause_idx < 1 or cause_idx > n:
                raise ParseError(dialog_id, f"utterances[{utt.index}].evidence", f"index {cause_idx} out of range")
            elif cause_idx > utt.index:
                counters["dropped_forward_cause"] += 1
            else:
                kept.append(cause_idx)
        raw_types = rec.get("type") or []
        if isinstance(raw_types, str):
            raw_types = [raw_types]
        types = _assign_cause_types(utterances, utt.index, kept, raw_types)
        for cause_idx, ctype in zip(kept, types):
            key = (utt.index, cause_idx, utt.emotion_label)
            if key in seen:
                counters["duplicate_triple"] += 1
                continue
            seen.add(key)
            quadruples.append(Quadruple(utt.index, cause_idx, utt.emotion_label, ctype))
    return Dialog(dialog_id, tuple(utterances), tuple(quadruples), split)


def _split_from_filename(name):
    stem = Path(name).stem.lower()
    for token in re.split(r"[^a-z]+", stem):
        split = normalize_split(token)
        if split:
            return split
    return None


def iter_source_records(source_dir):
    """Yield raw records from every ``*.json`` release file under ``source_dir``.

    The split comes from the file name (``dailydialog_train.json`` -> train).
    """
    for path in sorted(Path(source_dir).rglob("*.json")):
        split = _split_from_filename(path.name)
        if split is None:
            continue
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if not isinstance(payload, dict):
            continue
        for dialog_id, utterances in payload.items():
            yield {"dialog_id": str(dialog_id), "split": split, "utterances": utterances}


def ingest_source_dir(source_dir, counters=None):
    """Parse a RECCON release directory; returns ``(dialogs, failures)``.

    ``failures`` lists the :class:`ParseError` of every rejected record.
    """
    counters = counters if counters is not None else Counter()
    dialogs, failures = [], []
    for raw in iter_source_records(source_dir):
        try:
            dialogs.append(parse_source_dialog(raw, counters))
        except ParseError as exc:
            failures.append(exc)
    return dialogs, failures


# -- canonical JSON ----------------------------------------------------------


def dialog_to_json(d):
    return {
        "dialog_id": d.dialog_id,
        "split": d.split,
        "utterances": [
            {"index": u.index, "speaker": u.speaker, "text": u.text, "emotion": u.emotion_label}
            for u in d.utterances
        ],
        "quadruples": [
            {"emotion_idx": q.emotion_idx, "cause_idx": q.cause_idx, "emotion_type": q.emotion_type, "cause_type": q.cause_type}
            for q in d.quadruples
        ],
    }


def dialog_from_json(obj):
    dialog_id = str(obj.get("dialog_id", "<unknown>"))
    try:
        utterances = tuple(
            Utterance(int(u["index"]), str(u["speaker"]), str(u["text"]), str(u["emotion"]))
            for u in obj["utterances"]
        )
        quadruples = tuple(
            Quadruple(int(q["emotion_idx"]), int(q["cause_idx"]), str(q["emotion_type"]), str(q["cause_type"]))
            for q in obj.get("quadruples", [])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(dialog_id, "record", f"malformed canonical record ({exc})") from None
    return Dialog(dialog_id, utterances, quadruples, str(obj.get("split", "train")))


def write_jsonl(dialogs, path):
    with open(path, "w", encoding="utf-8") as fh:
        for d in dialogs:
            fh.write(json.dumps(dialog_to_json(d), ensure_ascii=False) + "\n")


def read_jsonl(path):
    dialogs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                dialogs.append(dialog_from_json(json.loads(line)))
    return dialogs


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    location: str
    message: str


def validate_dialog(d):
    """Return every violated invariant of ``d`` as a list of :class:`Violation`.

    An empty list means the dialog is valid.
    """
    report = []

    def add(kind, location, message):
        report.append(Violation(kind, location, message))

    n = len(d.utterances)
    if n == 0:
        add("empty dialog", d.dialog_id, "dialog has no utterances")
    if d.split not in SPLITS:
        add("unknown split", d.dialog_id, f"split {d.split!r}")
    for pos, u in enumerate(d.utterances, start=1):
        loc = f"{d.dialog_id}/u{pos}"
        if u.index != pos:
            add("non-contiguous index", loc, f"expected index {pos}, found {u.index}")
        if not u.text.strip():
            add("empty text", loc, "utterance text is blank")
        if not u.speaker:
            add("missing speaker", loc, "speaker is empty")
        if u.emotion_label not in UTTERANCE_LABELS:
            add("unknown emotion label", loc, f"label {u.emotion_label!r}")

    seen = set()
    for q in d.quadruples:
        loc = f"{d.dialog_id}/{q.short()}"
        if q.emotion_type not in EMOTIONS:
            add("unknown emotion type", loc, f"emotion type {q.emotion_type!r}")
        if q.cause_type not in CAUSE_TYPES:
            add("unknown cause type", loc, f"cause type {q.cause_type!r}")
        dangling = False
        for name, idx in (("emotion_idx", q.emotion_idx), ("cause_idx", q.cause_idx)):
            if not 1 <= idx <= n:
                add("dangling index", loc, f"{name}={idx} outside 1..{n}")
                dangling = True
        if q.cause_idx > q.emotion_idx:
            add("forward cause", loc, "cause utterance follows emotion utterance")
        if not dangling:
            label = d.utterances[q.emotion_idx - 1].emotion_label
            if label == "neutral":
                add("neutral emotion utterance", loc, "emotion utterance is labelled neutral")
            elif label != q.emotion_type:
                add("label mismatch", loc, f"utterance label {label!r} != emotion type {q.emotion_type!r}")
        if q.triple in seen:
            add("duplicate triple", loc, "(emotion_idx, cause_idx, emotion_type) repeated")
        seen.add(q.triple)
    return report


# -- analysis ----------------------------------------------------------------


def quadruple_distance(q):
    """Index distance between emotion and cause utterance; 0 means the same utterance."""
    return q.emotion_idx - q.cause_idx


def overlapped_quadruples(d):
    """Quadruples sharing their emotion or cause utterance with another quadruple.

    Accepts a :class:`Dialog` or any iterable of quadruples.
    """
    quads = set(d.quadruples if isinstance(d, Dialog) else d)
    by_emotion = Counter(q.emotion_idx for q in quads)
    by_cause = Counter(q.cause_idx for q in quads)
    return {q for q in quads if by_emotion[q.emotion_idx] > 1 or by_cause[q.cause_idx] > 1}


def _overlapped_bruteforce(quads):
    # pairwise definition, kept for cross-checking the counting version
    out = set()
    for a, b in combinations(set(quads), 2):
        if a.emotion_idx == b.emotion_idx or a.cause_idx == b.cause_idx:
            out.update((a, b))
    return out


@dataclass
class CorpusStats:
    conversations: dict = field(default_factory=dict)
    utterances: dict = field(default_factory=dict)
    quadruples: dict = field(default_factory=dict)
    emotion_type_counts: dict = field(default_factory=dict)
    cause_type_counts: dict = field(default_factory=dict)
    overlap_dialog_ratio: float = 0.0
    overlapped_quadruple_ratio: float = 0.0
    distance_histogram: dict = field(default_factory=dict)
    dropped_forward_cause_count: int = 0

    @property
    def total_quadruples(self):
        return sum(self.quadruples.values())

    def to_json(self):
        return {
            "conversations": self.conversations,
            "utterances": self.utterances,
            "quadruples": self.quadruples,
            "emotion_type_counts": self.emotion_type_counts,
            "cause_type_counts": self.cause_type_counts,
            "overlap_dialog_ratio": self.overlap_dialog_ratio,
            "overlapped_quadruple_ratio": self.overlapped_quadruple_ratio,
            "distance_histogram": {str(k): v for k, v in sorted(self.distance_histogram.items())},
            "dropped_forward_cause_count": self.dropped_forward_cause_count,
        }


def corpus_statistics(corpus: Iterable[Dialog], counters=None) -> CorpusStats:
    corpus = list(corpus)
    stats = CorpusStats(
        conversations={s: 0 for s in SPLITS},
        utterances={s: 0 for s in SPLITS},
        quadruples={s: 0 for s in SPLITS},
        emotion_type_counts={e: 0 for e in EMOTIONS},
        cause_type_counts={c: 0 for c in CAUSE_TYPES},
    )
    histogram = Counter()
    overlap_dialogs = 0
    overlap_quads = 0
    for d in corpus:
        stats.conversations[d.split] = stats.conversations.get(d.split, 0) + 1
        stats.utterances[d.split] = stats.utterances.get(d.split, 0) + len(d.utterances)
        stats.quadruples[d.split] = stats.quadruples.get(d.split, 0) + len(d.quadruples)
        for q in d.quadruples:
            stats.emotion_type_counts[q.emotion_type] = stats.emotion_type_counts.get(q.emotion_type, 0) + 1
            stats.cause_type_counts[q.cause_type] = stats.cause_type_counts.get(q.cause_type, 0) + 1
            histogram[quadruple_distance(q)] += 1
        ov = overlapped_quadruples(d)
        overlap_quads += len(ov)
        if ov:
            overlap_dialogs += 1
    stats.distance_histogram = dict(sorted(histogram.items()))
    stats.overlap_dialog_ratio = overlap_dialogs / len(corpus) if corpus else 0.0
    total = stats.total_quadruples
    stats.overlapped_quadruple_ratio = overlap_quads / total if total else 0.0
    if counters is not None:
        stats.dropped_forward_cause_count = int(counters.get("dropped_forward_cause", 0))
    return stats
