"""Two-stream hierarchical attention LSTM over per-frame spatial feature cubes."""
from ._backend import BACKEND
from .attention import AttentionParams, attend, attention_backward, attention_weights
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    Sample,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    read_sequence,
    subsample_frames,
    write_dataset,
    write_sequence,
)
from .lstm import GateActivations, LstmParams, LstmState, lstm_step, lstm_step_backward
from .model import HanModel, ModelConfig, backward, forward, layer2_schedule
from .training import TrainConfig, adadelta_step, clip_global_norm, nll_loss, train_epochs

__version__ = "0.1.0"
