"""Emotion-cause quadruple extraction in dialogs."""

from .corpus import Dialog, Quadruple, Utterance, corpus_statistics, parse_source_dialog, validate_dialog
from .evaluator import PRF, EvalReport, evaluate_all
from .fixtures import load_fixture
from .gridcodec import TagGridSet, decode_grids, encode_grids
from .trainer import Checkpoint, ECQEDModel, TrainConfig, evaluate_model, predict, train

__version__ = "0.1.0"
