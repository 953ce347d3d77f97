"""
Training configuration.

Defaults reproduce the Colored-MNIST setting: batch 256, GCE q 0.7, Adam at
1e-2 halved after iteration 10000, moving-average momentum 0.5 and a two-epoch
mixup ramp.
"""

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from debias.mixup import LAMBDA_MODES
from debias.prior import PriorStrategy
from debias.topology import CorrelationTopology
from losses.objectives import PRIOR_FLOOR
from utils.digests import canonical_config_text, config_hash
from utils.error_handlers import ConfigurationError

DTYPES = ('float32', 'float64')


class LossMode(str, Enum):
    LC = 'lc'
    CE = 'ce'
    REWEIGHTED_CE = 'rwce'


class TopologyAssumption(str, Enum):
    # Use the dataset's declared topology
    EXACT = 'exact'
    # Treat every label as owning one attribute value
    ONE_TO_ONE = 'one_to_one'


@dataclass
class TrainConfig:
    """
    Hyperparameters of a two-branch run.

    Attributes:
        epochs: Passes over the training split
        batch_size: Samples per iteration; the last batch may be shorter
        q: GCE exponent of the ERM branch
        learning_rate: Adam step size for both branches
        lr_decay: (iteration, factor) pairs applied once the iteration is passed
        alpha: Moving-average momentum of the group prior
        rampup_epochs: Epochs until the mixup ramp plateaus
        strategy: Group-prior update strategy
        topology: Override of the correlation topology, None for the dataset's
        mixup_enabled: Apply Group MixUp to the robust branch
        loss_mode: Robust-branch objective
        seed: Master seed for initialization, shuffling and mixup
        hidden_width: Units per hidden layer
        hidden_layers: Number of hidden layers
        dtype: Parameter precision
        per_sample_prior: Per-sample entry updates for the moving-average prior
        freeze_prior: Keep the uniform prior (ablation)
        lambda_mode: 'ramp' or 'static' mixing-coefficient distribution
        topology_assumption: 'exact' or 'one_to_one'
        weight_decay: Decoupled weight decay of both Adam optimizers
        cosine_steps: Cosine learning-rate horizon in iterations, None to disable
        prior_floor: Lower clamp applied before taking log of the prior
        dump_priors: Write the prior table after every epoch
        eval_train_margins: Record train margins on inferred attributes
    """

    epochs: int = 100
    batch_size: int = 256
    q: float = 0.7
    learning_rate: float = 1e-2
    lr_decay: Tuple[Tuple[int, float], ...] = ((10000, 0.5),)
    alpha: float = 0.5
    rampup_epochs: int = 2
    strategy: PriorStrategy = PriorStrategy.MOVING_AVG
    topology: Optional[CorrelationTopology] = None
    mixup_enabled: bool = True
    loss_mode: LossMode = LossMode.LC
    seed: int = 0
    hidden_width: int = 100
    hidden_layers: int = 3
    dtype: str = 'float32'
    per_sample_prior: bool = False
    freeze_prior: bool = False
    lambda_mode: str = 'ramp'
    topology_assumption: TopologyAssumption = TopologyAssumption.EXACT
    weight_decay: float = 0.0
    cosine_steps: Optional[int] = None
    prior_floor: float = PRIOR_FLOOR
    dump_priors: bool = False
    eval_train_margins: bool = True
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        try:
            self.strategy = PriorStrategy(self.strategy)
            self.loss_mode = LossMode(self.loss_mode)
            self.topology_assumption = TopologyAssumption(self.topology_assumption)
        except ValueError as e:
            raise ConfigurationError(str(e))
        self.lr_decay = tuple((int(it), float(f)) for it, f in self.lr_decay)

        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be at least 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be at least 1, got {self.batch_size}")
        if not 0.0 <= self.q < 1.0:
            raise ConfigurationError(f"GCE q must lie in [0, 1), got {self.q}")
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.rampup_epochs < 1:
            raise ConfigurationError(f"rampup_epochs must be at least 1, got {self.rampup_epochs}")
        if self.dtype not in DTYPES:
            raise ConfigurationError(f"dtype must be one of {DTYPES}, got {self.dtype}")
        if self.lambda_mode not in LAMBDA_MODES:
            raise ConfigurationError(f"lambda_mode must be one of {LAMBDA_MODES}, got {self.lambda_mode}")
        if self.prior_floor <= 0:
            raise ConfigurationError(f"prior_floor must be positive, got {self.prior_floor}")
        if self.hidden_width < 1 or self.hidden_layers < 0:
            raise ConfigurationError("hidden_width must be positive and hidden_layers non-negative")

    def to_dict(self) -> Dict[str, Any]:
        """JSON-serializable resolved configuration."""
        data = asdict(self)
        data['strategy'] = self.strategy.value
        data['loss_mode'] = self.loss_mode.value
        data['topology_assumption'] = self.topology_assumption.value
        data['topology'] = None if self.topology is None else self.topology.to_dict()
        data['lr_decay'] = [list(step) for step in self.lr_decay]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainConfig':
        data = dict(data)
        if data.get('topology') is not None:
            data['topology'] = CorrelationTopology.from_dict(data['topology'])
        if 'lr_decay' in data:
            data['lr_decay'] = tuple(tuple(step) for step in data['lr_decay'])
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**data)

    def canonical_text(self) -> str:
        return canonical_config_text(self.to_dict())

    def config_hash(self) -> str:
        return config_hash(self.to_dict())
