"""Heterogeneous dialog graph and relational graph convolution.

Node layout: utterance nodes first (in utterance order), then one node per
speaker (order of first appearance), then the single dialog node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .errors import ParameterError

EDGE_KINDS = ("DU", "SU", "UU", "SELF")
NODE_KINDS = ("utterance", "speaker", "dialog")
MAX_SPEAKER_ROLES = 8


@dataclass
class HeteroGraph:
    node_kinds: list
    features: torch.Tensor  # (num_nodes, d)
    edges: list  # (source, target, kind); DU/SU/UU are undirected, SELF is a loop
    num_utterances: int
    node_ids: list = field(default_factory=list)

    @property
    def num_nodes(self):
        return len(self.node_kinds)

    def edge_counts(self):
        counts = {k: 0 for k in EDGE_KINDS}
        for _, _, k in self.edges:
            counts[k] += 1
        return counts

    def utterance_nodes(self):
        return [i for i, k in enumerate(self.node_kinds) if k == "utterance"]

    def adjacency(self):
        """Per-kind dense matrices with ``A[n, v] = 1`` when ``v`` sends to ``n``."""
        m = self.num_nodes
        adj = {k: torch.zeros(m, m, dtype=self.features.dtype, device=self.features.device) for k in EDGE_KINDS}
        for s, t, k in self.edges:
            adj[k][t, s] = 1.0
            adj[k][s, t] = 1.0
        return adj


def speaker_slot(order):
    """Embedding slot for the ``order``-th distinct speaker of a dialog."""
    return order if order < MAX_SPEAKER_ROLES else MAX_SPEAKER_ROLES


class SpeakerTable(nn.Module):
    """Learned speaker embeddings keyed by within-dialog role order, plus a fallback slot."""

    def __init__(self, dim):
        super().__init__()
        self.embedding = nn.Embedding(MAX_SPEAKER_ROLES + 1, dim)
        nn.init.normal_(self.embedding.weight, std=0.1)

    def forward(self, num_speakers):
        slots = torch.tensor([speaker_slot(i) for i in range(num_speakers)], device=self.embedding.weight.device)
        return self.embedding(slots)


def build_graph(d, X, speaker_table, use_su_edges=True, use_du_edges=True):
    """Graph over dialog ``d`` with utterance features ``X``.

    ``speaker_table`` is a :class:`SpeakerTable` or a plain ``(slots, d)`` tensor.
    Dropping an edge kind keeps its nodes, which are then only self-connected.
    """
    n = len(d.utterances)
    speakers = d.speakers
    role = {s: i for i, s in enumerate(speakers)}
    if isinstance(speaker_table, nn.Module):
        spk = speaker_table(len(speakers)).to(X.dtype)
    else:
        spk = torch.stack([speaker_table[speaker_slot(i)] for i in range(len(speakers))]).to(X.dtype)
    features = torch.cat([X, spk, X.mean(dim=0, keepdim=True)], dim=0)
    kinds = ["utterance"] * n + ["speaker"] * len(speakers) + ["dialog"]
    dialog_node = n + len(speakers)
    edges = []
    for i, u in enumerate(d.utterances):
        if use_du_edges:
            edges.append((dialog_node, i, "DU"))
        if use_su_edges:
            edges.append((n + role[u.speaker], i, "SU"))
    for i in range(n - 1):
        edges.append((i, i + 1, "UU"))
    for v in range(len(kinds)):
        edges.append((v, v, "SELF"))
    ids = [f"u{i + 1}" for i in range(n)] + [f"spk:{s}" for s in speakers] + ["dialog"]
    return HeteroGraph(kinds, features, edges, n, ids)


def _check_layer(layer, dim):
    for k, (w, b) in layer.items():
        if tuple(w.shape) != (dim, dim) or tuple(b.shape) != (dim,):
            raise ParameterError(f"edge kind {k}: W {tuple(w.shape)}, b {tuple(b.shape)} for hidden size {dim}")


def rgcn_layer(h, adj, layer):
    """``ReLU(sum_k sum_{v in N_k(n)} (W_k h_v + b_k))`` for every node ``n``.

    No degree normalisation; the bias is added once per incoming edge.
    """
    out = torch.zeros_like(h)
    for k, (w, b) in layer.items():
        a = adj.get(k)
        if a is None:
            continue
        out = out + a @ (h @ w.T) + a.sum(dim=1, keepdim=True) * b
    return torch.relu(out)


def graph_convolve(g, params, between_layers=None):
    """Run every layer of ``params`` (a list of ``{kind: (W, b)}``) over ``g``.

    Returns the utterance-node rows, ``(N, d)``.
    """
    dim = g.features.shape[1]
    adj = g.adjacency()
    h = g.features
    for layer in params:
        _check_layer(layer, dim)
        h = rgcn_layer(h, adj, layer)
        if between_layers is not None:
            h = between_layers(h)
    return h[g.utterance_nodes()]


class RGCN(nn.Module):
    def __init__(self, dim, num_layers=2, dropout=0.0):
        super().__init__()
        self.dim = dim
        self.weights = nn.ParameterList()
        self.biases = nn.ParameterList()
        for _ in range(num_layers):
            for _ in EDGE_KINDS:
                w = nn.Parameter(torch.empty(dim, dim))
                nn.init.xavier_uniform_(w, gain=0.5)
                self.weights.append(w)
                self.biases.append(nn.Parameter(torch.zeros(dim)))
        self.num_layers = num_layers
        self.dropout = nn.Dropout(dropout)

    def params(self):
        nk = len(EDGE_KINDS)
        return [
            {k: (self.weights[l * nk + j], self.biases[l * nk + j]) for j, k in enumerate(EDGE_KINDS)}
            for l in range(self.num_layers)
        ]

    def forward(self, g):
        return graph_convolve(g, self.params(), between_layers=self.dropout)
