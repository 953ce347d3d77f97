"""MLP scorer, Adam optimizer and checkpoint codec."""

from model.mlp import MlpGradients, MlpScorer
from model.optim import Adam, AdamState, adam_step, scheduled_learning_rate
from model.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint

__all__ = [
    'MlpGradients',
    'MlpScorer',
    'Adam',
    'AdamState',
    'adam_step',
    'scheduled_learning_rate',
    'decode_checkpoint',
    'encode_checkpoint',
    'load_checkpoint',
    'save_checkpoint',
]
