"""Two-branch logit-correction training."""

from trainer.config import LossMode, TopologyAssumption, TrainConfig
from trainer.evaluation import EpochRecord, SplitMetrics, evaluate, margin_summary
from trainer.loop import TrainResult, TwoBranchTrainer, train
from trainer.reports import RunManifest, collect_runs, verify_run, write_run_outputs

__all__ = [
    'LossMode',
    'TopologyAssumption',
    'TrainConfig',
    'EpochRecord',
    'SplitMetrics',
    'evaluate',
    'margin_summary',
    'TrainResult',
    'TwoBranchTrainer',
    'train',
    'RunManifest',
    'collect_runs',
    'verify_run',
    'write_run_outputs',
]
