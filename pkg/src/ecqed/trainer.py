"""Model assembly, grid cross-entropy, training loop, checkpoints and prediction."""

from __future__ import annotations

import copy
import json
import logging
import math
import random
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .corpus import Dialog
from .encoder import EncoderAdapter, encode_utterances, make_encoder
from .errors import ArtifactError, ConfigError, NumericError
from .evaluator import evaluate_all, evaluate_quadruples
from .gridcodec import (
    ONE_GRID_TAGS,
    TAGS,
    OneGridTagging,
    TagGridSet,
    decode_grids,
    decode_one_grid,
    encode_grids,
    encode_one_grid,
)
from .pairscorer import PairScorer, ScoreTensor
from .sshg import RGCN, SpeakerTable, build_graph

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "ecqed-checkpoint"
CHECKPOINT_VERSION = 1

# ablation name -> config overrides
ABLATIONS = {
    "sshg": {"use_sshg": False},
    "su": {"use_su_edges": False},
    "du": {"use_du_edges": False},
    "mlp": {"use_mlp": False},
    "biaffine": {"use_biaffine": False},
}
VARIANTS = {
    "-SSHG": ("sshg",),
    "-SU edge": ("su",),
    "-DU edge": ("du",),
    "-DU and SU edge": ("du", "su"),
    "-MLP": ("mlp",),
    "-Biaffine": ("biaffine",),
}


@dataclass
class TrainConfig:
    lr_encoder: float = 2e-5
    lr_other: float = 1e-5
    batch_size: int = 2
    epochs: int = 50
    hidden_size: int = 768
    gcn_layers: int = 2
    dropout: float = 0.2
    seed: int = 0
    use_sshg: bool = True
    use_su_edges: bool = True
    use_du_edges: bool = True
    use_mlp: bool = True
    use_biaffine: bool = True
    one_grid: bool = False
    encoder: str = "bert-base-uncased"

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name: f for f in fields(cls)}
        values = {}
        for key, value in (mapping or {}).items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, value, type(getattr(cls(), key)))
        return cls(**values).validate()

    @classmethod
    def from_file(cls, path):
        import yaml

        try:
            with open(path, encoding="utf-8") as fh:
                mapping = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} does not parse: {exc}") from None
        if not isinstance(mapping, dict):
            raise ConfigError(f"config {path} must be a flat key/value mapping")
        return cls.from_mapping(mapping)

    def validate(self):
        for key in ("lr_encoder", "lr_other"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive")
        for key in ("batch_size", "epochs", "hidden_size", "gcn_layers"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if not (self.use_mlp or self.use_biaffine):
            raise ConfigError("use_mlp and use_biaffine cannot both be false")
        if not self.encoder:
            raise ConfigError("encoder name is empty")
        return self

    def with_ablations(self, names):
        overrides = {}
        for name in names:
            name = name.strip().lower()
            if not name:
                continue
            if name not in ABLATIONS:
                raise ConfigError(f"unknown ablation {name!r}; choose from {sorted(ABLATIONS)}")
            overrides.update(ABLATIONS[name])
        return replace(self, **overrides).validate()

    def to_json(self):
        return asdict(self)


def _coerce(key, value, kind):
    if kind is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.strip().lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.strip().lower() in ("true", "1", "yes")
        raise ConfigError(f"config key {key!r} expects a boolean, got {value!r}")
    try:
        if kind is int and isinstance(value, float) and not value.is_integer():
            raise ValueError
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r} expects {kind.__name__}, got {value!r}") from None


class ECQEDModel(nn.Module):
    """Encoder -> (optional) dialog graph -> pair scorer."""

    def __init__(self, cfg: TrainConfig, encoder: EncoderAdapter | None = None):
        super().__init__()
        self.cfg = cfg
        self.encoder = encoder if encoder is not None else make_encoder(cfg.encoder)
        if self.encoder.hidden_size != cfg.hidden_size:
            raise ConfigError(
                f"hidden_size {cfg.hidden_size} does not match encoder {self.encoder.name!r} "
                f"output size {self.encoder.hidden_size}"
            )
        d = cfg.hidden_size
        self.speakers = SpeakerTable(d) if cfg.use_sshg else None
        self.rgcn = RGCN(d, cfg.gcn_layers, cfg.dropout) if cfg.use_sshg else None
        if cfg.one_grid:
            grids, tags = 1, len(ONE_GRID_TAGS)
        else:
            grids, tags = 6, len(TAGS)
        self.scorer = PairScorer(d, grids, tags, cfg.use_mlp, cfg.use_biaffine, cfg.dropout)

    def contextualize(self, dialog, X):
        if self.rgcn is None:
            return X
        g = build_graph(dialog, X, self.speakers, self.cfg.use_su_edges, self.cfg.use_du_edges)
        return self.rgcn(g)

    def score_features(self, dialog, X):
        """Scores from precomputed utterance vectors (bypasses the encoder)."""
        return self.scorer(self.contextualize(dialog, X))

    def forward(self, dialog):
        return self.score_features(dialog, encode_utterances(dialog, self.encoder))

    def encoder_parameters(self):
        return list(self.encoder.parameters()) if self.encoder.trainable else []

    def other_parameters(self):
        enc = {id(p) for p in self.encoder.parameters()}
        return [p for p in self.parameters() if id(p) not in enc]


def gold_targets(dialog, one_grid=False):
    """Gold tag indices, ``(N, N, grids)`` long tensor."""
    if one_grid:
        tagging, _ = encode_one_grid(dialog)
        return torch.as_tensor(tagging.grid[:, :, None])
    return torch.as_tensor(encode_grids(dialog).as_array())


def _target_tensor(gold):
    if isinstance(gold, TagGridSet):
        return torch.as_tensor(gold.as_array())
    if isinstance(gold, OneGridTagging):
        return torch.as_tensor(gold.grid[:, :, None])
    return torch.as_tensor(gold)


def cell_nll(scores: ScoreTensor, gold):
    """Sum of ``-log p(gold tag)`` over valid cells of every grid, and the cell count."""
    logits = scores.logits
    if not torch.isfinite(logits).all():
        raise NumericError("non-finite scores")
    target = _target_tensor(gold).to(logits.device)
    if target.shape != logits.shape[:3]:
        raise ConfigError(f"gold grids {tuple(target.shape)} do not match scores {tuple(logits.shape[:3])}")
    logp = torch.log_softmax(logits, dim=-1)
    picked = logp.gather(-1, target.unsqueeze(-1)).squeeze(-1)  # (N, N, G)
    valid = picked[scores.mask]
    return -valid.sum(), valid.numel()


def compute_loss(scores: ScoreTensor, gold):
    """Mean cross-entropy over the valid cells of all grids."""
    total, count = cell_nll(scores, gold)
    return total / count


def decode_scores(scores: ScoreTensor, one_grid=False):
    tags = scores.argmax().detach().cpu().numpy()
    n = tags.shape[0]
    if one_grid:
        return decode_one_grid(OneGridTagging(n, tags[:, :, 0]))
    return decode_grids(TagGridSet.from_array(tags))


# -- checkpoints -------------------------------------------------------------


@dataclass
class Checkpoint:
    config: TrainConfig
    state_dict: dict
    metadata: dict = field(default_factory=dict)

    def save(self, path):
        payload = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config_json": json.dumps(self.config.to_json(), sort_keys=True),
            "metadata_json": json.dumps(self.metadata, sort_keys=True),
            "state_dict": self.state_dict,
        }
        torch.save(payload, path)

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ArtifactError(f"checkpoint {path} not found")
        try:
            payload = torch.load(path, map_location="cpu", weights_only=True)
        except Exception as exc:  # noqa: BLE001 - any unpickling failure is an artifact problem
            raise ArtifactError(f"checkpoint {path} cannot be read: {exc}") from None
        if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
            raise ArtifactError(f"{path} is not an ECQED checkpoint")
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ArtifactError(f"checkpoint version {payload.get('version')} != supported {CHECKPOINT_VERSION}")
        try:
            cfg = TrainConfig.from_mapping(json.loads(payload["config_json"]))
        except ConfigError as exc:
            raise ArtifactError(f"checkpoint config is invalid: {exc}") from None
        return cls(cfg, payload["state_dict"], json.loads(payload["metadata_json"]))

    def build_model(self):
        model = ECQEDModel(self.config)
        try:
            model.load_state_dict(self.state_dict)
        except RuntimeError as exc:
            raise ArtifactError(f"checkpoint weights do not fit the model: {exc}") from None
        return model.eval()


def as_model(model_or_ckpt):
    if isinstance(model_or_ckpt, ECQEDModel):
        return model_or_ckpt
    if isinstance(model_or_ckpt, Checkpoint):
        return model_or_ckpt.build_model()
    return Checkpoint.load(model_or_ckpt).build_model()


# -- prediction --------------------------------------------------------------


def predict(dialog: Dialog, model) -> set:
    """Argmax-decode the model's tag grids into quadruples."""
    model = as_model(model)
    was_training = model.training
    model.eval()
    with torch.no_grad():
        out = decode_scores(model(dialog), model.cfg.one_grid)
    model.train(was_training)
    return out


def predict_many(dialogs, model):
    model = as_model(model)
    return {d.dialog_id: predict(d, model) for d in dialogs}


def evaluate_model(model, dialogs):
    dialogs = list(dialogs)
    pred = predict_many(dialogs, model)
    return evaluate_all(pred, {d.dialog_id: d.quad_set for d in dialogs})


# -- training ----------------------------------------------------------------


def set_seed(seed):
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)


def _snapshot(model):
    return {k: v.detach().clone() for k, v in model.state_dict().items()}


def train(corpus, cfg: TrainConfig, on_epoch=None, encoder=None) -> Checkpoint:
    """Fit a model on the train split, selecting the epoch with the best val quad F1.

    ``on_epoch`` receives ``{"epoch", "train_loss", "val_f1_quad"}`` after each
    epoch. Without validation dialogs the last epoch is kept. Ties in val F1 go
    to the later epoch.
    """
    cfg.validate()
    corpus = list(corpus)
    train_set = [d for d in corpus if d.split == "train"]
    val_set = [d for d in corpus if d.split == "val"]
    if not train_set:
        raise ConfigError("training corpus has no train-split dialogs")

    set_seed(cfg.seed)
    order_rng = random.Random(cfg.seed)
    model = ECQEDModel(cfg, encoder=encoder)
    groups = [{"params": model.other_parameters(), "lr": cfg.lr_other}]
    if model.encoder_parameters():
        groups.append({"params": model.encoder_parameters(), "lr": cfg.lr_encoder})
    optimizer = torch.optim.Adam(groups)
    targets = {d.dialog_id: gold_targets(d, cfg.one_grid) for d in train_set}

    loss_curve, val_curve = [], []
    best_f1, best_epoch, best_state = -1.0, 0, None
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = list(range(len(train_set)))
        order_rng.shuffle(order)
        batch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_set[i] for i in order[start : start + cfg.batch_size]]
            total, count = 0.0, 0
            for d in batch:
                s, c = cell_nll(model(d), targets[d.dialog_id])
                total, count = total + s, count + c
            loss = total / count
            if not torch.isfinite(loss):
                raise NumericError(f"loss became {loss.item()} at epoch {epoch} (batch {[d.dialog_id for d in batch]})")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            batch_losses.append(loss.item())
        train_loss = float(np.mean(batch_losses))
        loss_curve.append(train_loss)

        val_f1 = None
        if val_set:
            pred = predict_many(val_set, model)
            val_f1 = evaluate_quadruples(pred, {d.dialog_id: d.quad_set for d in val_set}).f1
        val_curve.append(val_f1)
        record = {"epoch": epoch, "train_loss": train_loss, "val_f1_quad": val_f1}
        log.info("epoch %d loss %.6f val_f1 %s", epoch, train_loss, val_f1)
        if on_epoch is not None:
            on_epoch(record)

        score = val_f1 if val_f1 is not None else math.inf
        if score >= best_f1:
            best_f1, best_epoch, best_state = score, epoch, _snapshot(model)

    metadata = {
        "epoch": best_epoch,
        "seed": cfg.seed,
        "loss_curve": loss_curve,
        "val_f1_curve": val_curve,
        "best_val_f1": None if math.isinf(best_f1) else best_f1,
    }
    return Checkpoint(copy.deepcopy(cfg), best_state, metadata)


def run_ablations(corpus, base_cfg: TrainConfig, variants=None, eval_split="test"):
    """Train each ablation variant and evaluate it on ``eval_split``.

    Returns ``{variant name: EvalReport}``.
    """
    corpus = list(corpus)
    eval_set = [d for d in corpus if d.split == eval_split]
    reports = {}
    for name in variants or VARIANTS:
        cfg = base_cfg.with_ablations(VARIANTS[name])
        ckpt = train(corpus, cfg)
        reports[name] = evaluate_model(ckpt.build_model(), eval_set)
    return reports
