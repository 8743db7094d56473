"""Pair representations (conditional layer norm) and fused MLP + biaffine tag scores."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .errors import ConfigError, ParameterError

CLN_EPS = 1e-5


def cln(h_i, h_j, w_alpha, b_alpha, w_beta, b_beta, eps=CLN_EPS):
    """Normalise ``h_j`` with gain and shift generated from ``h_i``.

    ``(W_a h_i + b_a) * (h_j - mean) / (std + eps) + (W_b h_i + b_b)``, with the
    population standard deviation over the last axis. Broadcasts over leading axes.
    """
    mu = h_j.mean(dim=-1, keepdim=True)
    sigma = (h_j - mu).pow(2).mean(dim=-1, keepdim=True).sqrt()
    gamma = h_i @ w_alpha.T + b_alpha
    lam = h_i @ w_beta.T + b_beta
    return gamma * (h_j - mu) / (sigma + eps) + lam


class ConditionalLayerNorm(nn.Module):
    def __init__(self, dim, eps=CLN_EPS):
        super().__init__()
        self.w_alpha = nn.Parameter(torch.empty(dim, dim))
        self.b_alpha = nn.Parameter(torch.ones(dim))
        self.w_beta = nn.Parameter(torch.empty(dim, dim))
        self.b_beta = nn.Parameter(torch.zeros(dim))
        nn.init.normal_(self.w_alpha, std=0.02)
        nn.init.normal_(self.w_beta, std=0.02)
        self.eps = eps

    def forward(self, H):
        """Pair grid ``V[i, j] = CLN(h_i, h_j)`` of shape ``(N, N, d)``."""
        n = H.shape[0]
        h_i = H[:, None, :].expand(n, n, -1)
        h_j = H[None, :, :].expand(n, n, -1)
        return cln(h_i, h_j, self.w_alpha, self.b_alpha, self.w_beta, self.b_beta, self.eps)


class MLPPredictor(nn.Module):
    """Two-layer perceptron applied to every cell of the pair grid."""

    def __init__(self, dim, out_dim, hidden=None):
        super().__init__()
        self.hidden = nn.Linear(dim, hidden or dim)
        self.out = nn.Linear(hidden or dim, out_dim)

    def forward(self, V):
        if V.shape[-1] != self.hidden.in_features:
            raise ParameterError(f"MLP expects width {self.hidden.in_features}, got {V.shape[-1]}")
        return self.out(torch.relu(self.hidden(V)))


def mlp_scores(V, mlp):
    return mlp(V)


def biaffine(e, c, U, W, b):
    """``S[i, j, k] = e_i^T U_k c_j + W_k [e_i; c_j] + b_k``.

    ``e``: (N, p), ``c``: (N, p), ``U``: (p, K, p), ``W``: (K, 2p), ``b``: (K,).
    """
    p = e.shape[-1]
    if U.shape[0] != p or U.shape[2] != c.shape[-1] or W.shape != (U.shape[1], 2 * p) or b.shape != (U.shape[1],):
        raise ParameterError(f"biaffine shapes U {tuple(U.shape)}, W {tuple(W.shape)}, b {tuple(b.shape)} for width {p}")
    bilinear = torch.einsum("ip,pkq,jq->ijk", e, U, c)
    linear = (e @ W[:, :p].T)[:, None, :] + (c @ W[:, p:].T)[None, :, :]
    return bilinear + linear + b


class BiaffinePredictor(nn.Module):
    def __init__(self, dim, out_dim, proj_dim=None):
        super().__init__()
        proj_dim = proj_dim or max(1, dim // 2)
        self.proj_emotion = nn.Linear(dim, proj_dim)
        self.proj_cause = nn.Linear(dim, proj_dim)
        self.U = nn.Parameter(torch.empty(proj_dim, out_dim, proj_dim))
        self.W = nn.Parameter(torch.empty(out_dim, 2 * proj_dim))
        self.b = nn.Parameter(torch.zeros(out_dim))
        nn.init.xavier_uniform_(self.U)
        nn.init.xavier_uniform_(self.W)

    def forward(self, H):
        if H.shape[-1] != self.proj_emotion.in_features:
            raise ParameterError(f"biaffine expects width {self.proj_emotion.in_features}, got {H.shape[-1]}")
        e = torch.relu(self.proj_emotion(H))
        c = torch.relu(self.proj_cause(H))
        return biaffine(e, c, self.U, self.W, self.b)


def biaffine_scores(H, predictor):
    return predictor(H)


@dataclass
class ScoreTensor:
    logits: torch.Tensor  # (N, N, grids, tags), unmasked fused logits
    probs: torch.Tensor  # same shape; masked cells are one-hot on tag 0 (NONE)
    mask: torch.Tensor  # (N, N) bool, True on valid cells

    def argmax(self):
        return self.probs.argmax(dim=-1)


def upper_mask(n, device=None):
    return torch.ones(n, n, dtype=torch.bool, device=device).triu()


def fuse_scores(y_mlp, y_biaffine, num_grids, num_tags):
    """Sum the available predictors' logits and softmax over tags per (cell, grid).

    Either input may be ``None`` when that predictor is ablated. Strict-lower
    triangle cells get probability 1 on NONE.
    """
    if y_mlp is None and y_biaffine is None:
        raise ConfigError("at least one of the MLP and biaffine predictors must be enabled")
    if y_mlp is not None and y_biaffine is not None and y_mlp.shape != y_biaffine.shape:
        raise ParameterError(f"score shapes differ: {tuple(y_mlp.shape)} vs {tuple(y_biaffine.shape)}")
    fused = y_mlp if y_biaffine is None else (y_biaffine if y_mlp is None else y_mlp + y_biaffine)
    n = fused.shape[0]
    logits = fused.reshape(n, n, num_grids, num_tags)
    mask = upper_mask(n, fused.device)
    none = torch.zeros_like(logits)
    none[..., 0] = 1.0
    probs = torch.where(mask[:, :, None, None], torch.softmax(logits, dim=-1), none)
    return ScoreTensor(logits, probs, mask)


class PairScorer(nn.Module):
    """CLN pair grid -> MLP scores, H -> biaffine scores, fused per cell."""

    def __init__(self, dim, num_grids=6, num_tags=5, use_mlp=True, use_biaffine=True, dropout=0.0):
        super().__init__()
        if not (use_mlp or use_biaffine):
            raise ConfigError("use_mlp and use_biaffine cannot both be false")
        self.num_grids = num_grids
        self.num_tags = num_tags
        out_dim = num_grids * num_tags
        self.cln = ConditionalLayerNorm(dim) if use_mlp else None
        self.mlp = MLPPredictor(dim, out_dim) if use_mlp else None
        self.biaffine = BiaffinePredictor(dim, out_dim) if use_biaffine else None
        self.dropout = nn.Dropout(dropout)

    def forward(self, H):
        y_mlp = y_bi = None
        if self.mlp is not None:
            V = self.dropout(self.cln(H))
            y_mlp = self.mlp(V)
        if self.biaffine is not None:
            y_bi = self.biaffine(H)
        return fuse_scores(y_mlp, y_bi, self.num_grids, self.num_tags)
