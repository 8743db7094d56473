"""Utterance encoders: one contextual vector per utterance of a dialog."""

from __future__ import annotations

import hashlib
import os
import re

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, EncodingError


class EncoderAdapter(nn.Module):
    """Maps a dialog to an ``(N, hidden_size)`` tensor.

    ``trainable`` tells the trainer whether the adapter's parameters belong in
    the encoder learning-rate group.
    """

    name = "abstract"
    hidden_size = 0
    trainable = False

    def forward(self, dialog):  # pragma: no cover - interface
        raise NotImplementedError


def _normalize_text(text):
    return re.sub(r"\s+", " ", text.strip().lower())


def _text_vector(text, dim, seed):
    digest = hashlib.sha256(f"{seed}\x00{_normalize_text(text)}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def toy_encode(d, dim, seed=0):
    """Deterministic hash-based utterance embeddings with unit-norm rows.

    Each text maps to a seeded pseudo-random unit vector; every row after the
    first is then averaged with its predecessor's raw vector and re-normalized.
    """
    if dim < 2:
        raise ValueError("toy encoder needs dim >= 2")
    raw = np.stack([_text_vector(u.text, dim, seed) for u in d.utterances])
    out = raw.copy()
    for i in range(1, len(raw)):
        mixed = 0.5 * (raw[i] + raw[i - 1])
        norm = np.linalg.norm(mixed)
        # antipodal neighbours: keep the raw row
        out[i] = mixed / norm if norm > 1e-12 else raw[i]
    return out


class ToyEncoder(EncoderAdapter):
    trainable = False

    def __init__(self, dim, seed=0):
        super().__init__()
        if dim < 2:
            raise ConfigError("toy encoder needs dim >= 2")
        self.dim = int(dim)
        self.seed = int(seed)
        self.hidden_size = self.dim
        self.name = f"toy:{self.dim}:{self.seed}"
        # carries dtype/device for the output
        self.register_buffer("_anchor", torch.zeros(()), persistent=False)

    def forward(self, dialog):
        x = toy_encode(dialog, self.dim, self.seed)
        return torch.as_tensor(x, dtype=self._anchor.dtype, device=self._anchor.device)


def plan_chunks(lengths, window):
    """Split utterances into overlapping windows of at most ``window`` tokens.

    Chunks break at utterance boundaries and each new chunk starts roughly half a
    window after the previous one. Returns ``(start, end)`` utterance ranges.
    """
    n = len(lengths)
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    if offsets[-1] <= window:
        return [(0, n)]
    chunks = []
    start = 0
    while True:
        end = start
        while end < n and offsets[end + 1] - offsets[start] <= window:
            end += 1
        if end == start:
            raise EncodingError(f"utterance {start + 1} alone needs {lengths[start]} tokens > window {window}")
        chunks.append((start, end))
        if end == n:
            return chunks
        nxt = start + 1
        while nxt < end and offsets[nxt] - offsets[start] < window / 2:
            nxt += 1
        start = nxt


def assign_chunks(lengths, chunks):
    """For each utterance, the index of the chunk in which it sits most centrally."""
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    best = []
    for i in range(len(lengths)):
        centre = offsets[i] + lengths[i] / 2
        choice, dist = None, None
        for k, (s, e) in enumerate(chunks):
            if s <= i < e:
                mid = (offsets[s] + offsets[e]) / 2
                if dist is None or abs(centre - mid) < dist:
                    choice, dist = k, abs(centre - mid)
        best.append(choice)
    return best


class PretrainedEncoder(EncoderAdapter):
    """BERT-style encoder: ``[CLS] u_i [SEP]`` per utterance, concatenated.

    The vector of utterance ``i`` is the hidden state of its own [CLS] token.
    Dialogs longer than the model's window are chunked (see :func:`plan_chunks`).
    """

    trainable = True

    def __init__(self, model, tokenizer, name="pretrained", max_length=None):
        super().__init__()
        self.model = model
        self.tokenizer = tokenizer
        self.name = name
        self.hidden_size = int(model.config.hidden_size)
        self.max_length = int(max_length or getattr(model.config, "max_position_embeddings", 512))

    @classmethod
    def from_pretrained(cls, name, cache_dir=None):
        from transformers import AutoModel, AutoTokenizer

        cache_dir = cache_dir or os.environ.get("ECQED_CACHE_DIR")
        try:
            tokenizer = AutoTokenizer.from_pretrained(name, cache_dir=cache_dir)
            model = AutoModel.from_pretrained(name, cache_dir=cache_dir)
        except OSError as exc:
            raise ConfigError(f"cannot load pretrained encoder {name!r}: {exc}") from None
        return cls(model, tokenizer, name=name)

    def _wrapped_ids(self, dialog):
        cls_id, sep_id = self.tokenizer.cls_token_id, self.tokenizer.sep_token_id
        out = []
        for u in dialog.utterances:
            ids = self.tokenizer(u.text, add_special_tokens=False)["input_ids"]
            if not ids:
                raise EncodingError(f"dialog {dialog.dialog_id}: utterance {u.index} has no tokens")
            out.append([cls_id] + list(ids) + [sep_id])
        return out

    def forward(self, dialog):
        pieces = self._wrapped_ids(dialog)
        lengths = [len(p) for p in pieces]
        try:
            chunks = plan_chunks(lengths, self.max_length)
        except EncodingError as exc:
            raise EncodingError(f"dialog {dialog.dialog_id}: {exc}") from None
        owner = assign_chunks(lengths, chunks)
        device = next(self.model.parameters()).device
        rows = [None] * len(pieces)
        for k, (s, e) in enumerate(chunks):
            members = [i for i in range(s, e) if owner[i] == k]
            if not members:
                continue
            ids, cls_pos = [], []
            for i in range(s, e):
                cls_pos.append(len(ids))
                ids.extend(pieces[i])
            input_ids = torch.tensor([ids], device=device)
            hidden = self.model(input_ids=input_ids, attention_mask=torch.ones_like(input_ids)).last_hidden_state[0]
            for i in members:
                rows[i] = hidden[cls_pos[i - s]]
        return torch.stack(rows)


def make_encoder(name, cache_dir=None):
    """Build an adapter from its config name: ``toy:<dim>:<seed>`` or a checkpoint id/path."""
    if name.startswith("toy:"):
        parts = name.split(":")
        try:
            dim = int(parts[1])
            seed = int(parts[2]) if len(parts) > 2 else 0
        except (IndexError, ValueError):
            raise ConfigError(f"bad toy encoder name {name!r}; expected toy:<dim>:<seed>") from None
        return ToyEncoder(dim, seed)
    return PretrainedEncoder.from_pretrained(name, cache_dir=cache_dir)


def encode_utterances(d, enc):
    """Run ``enc`` on ``d`` and check the result is a finite ``(N, hidden_size)`` matrix."""
    x = enc(d)
    if tuple(x.shape) != (len(d.utterances), enc.hidden_size):
        raise EncodingError(f"dialog {d.dialog_id}: encoder returned shape {tuple(x.shape)}")
    if not torch.isfinite(x).all():
        raise EncodingError(f"dialog {d.dialog_id}: non-finite utterance vectors")
    return x
