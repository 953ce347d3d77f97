"""
Two-branch training loop.

Each iteration trains the ERM branch with GCE on the original batch, folds
its refreshed predictions into the group prior, optionally mixes the batch
with same-label minority samples, and trains the robust branch with the
prior-corrected objective.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Union

import numpy as np

from config.monitoring import monitoring
from data.container import BiasedDataset
from debias.mixup import group_mixup, mixup_ramp
from debias.prior import GroupPrior
from debias.topology import AttributeSplitter, CorrelationTopology, attribute_posterior
from losses.objectives import (
    GceConfig,
    ce_loss_batch,
    fisher_weights,
    gce_loss_batch,
    lc_loss_batch,
    reweighted_ce_loss_batch,
)
from model.mlp import MlpScorer
from model.optim import Adam
from numerics.tensor import argmax_first, softmax
from trainer.config import LossMode, TopologyAssumption, TrainConfig
from trainer.evaluation import EpochRecord, batched_logits, evaluate, margin_summary
from utils.error_handlers import ConfigurationError, NumericError

logger = logging.getLogger(__name__)

# Receives ('erm', batch) and ('robust', mixed batch) every iteration
TrainHook = Callable[[str, np.ndarray], None]


@dataclass
class TrainResult:
    """Models, per-epoch records and the final prior of a run."""

    robust: MlpScorer
    erm: MlpScorer
    records: List[EpochRecord]
    prior: GroupPrior
    config: TrainConfig
    topology: CorrelationTopology
    iterations: int = 0
    prior_history: List[np.ndarray] = field(default_factory=list)

    @property
    def final_gba(self) -> float:
        return self.records[-1].gba

    @property
    def final_worst(self) -> float:
        return self.records[-1].worst_group

    @property
    def best_gba(self) -> float:
        return max(r.gba for r in self.records)

    @property
    def final_minority(self) -> Optional[float]:
        return self.records[-1].test.minority


def resolve_topology(dataset: BiasedDataset, config: TrainConfig) -> CorrelationTopology:
    """Topology the prior is estimated under; checked against the data before any training."""
    n_labels = int(max(dataset.y_train.max(), dataset.y_test.max())) + 1
    if n_labels > dataset.n_labels:
        raise ConfigurationError(f"dataset holds labels up to {n_labels - 1}, topology declares L={dataset.n_labels}")

    if config.topology is not None:
        topology = config.topology
        if topology.n_labels != dataset.n_labels or topology.n_attrs != dataset.n_attrs:
            raise ConfigurationError(
                f"configured topology is L={topology.n_labels}, K={topology.n_attrs}; "
                f"dataset is L={dataset.n_labels}, K={dataset.n_attrs}",
                details={'config': [topology.n_labels, topology.n_attrs],
                         'dataset': [dataset.n_labels, dataset.n_attrs]})
    else:
        topology = dataset.topology

    if config.topology_assumption == TopologyAssumption.ONE_TO_ONE:
        return CorrelationTopology.one_to_one(topology.n_labels)
    return topology


class TwoBranchTrainer:
    """
    Owns both scorers, their optimizers, the group prior and the random streams.

    One instance trains one run; `fit` may only be called once.
    """

    def __init__(self, dataset: BiasedDataset, config: TrainConfig, hook: Optional[TrainHook] = None):
        self.dataset = dataset
        self.config = config
        self.hook = hook
        self.topology = resolve_topology(dataset, config)
        self.dtype = np.dtype(config.dtype)

        root = np.random.SeedSequence(config.seed)
        init_seq, shuffle_seq, mixup_seq = root.spawn(3)
        erm_seed, robust_seed = (int(s) for s in init_seq.generate_state(2))
        self.shuffle_rng = np.random.default_rng(shuffle_seq)
        self.mixup_rng = np.random.default_rng(mixup_seq)

        build = dict(hidden_width=config.hidden_width, hidden_layers=config.hidden_layers, dtype=self.dtype)
        self.erm = MlpScorer.build(dataset.d, dataset.n_labels, seed=erm_seed, **build)
        self.robust = MlpScorer.build(dataset.d, dataset.n_labels, seed=robust_seed, **build)

        optim = dict(learning_rate=config.learning_rate, decay_schedule=config.lr_decay,
                     weight_decay=config.weight_decay, cosine_steps=config.cosine_steps)
        self.erm_opt = Adam(self.erm.parameters(), **optim)
        self.robust_opt = Adam(self.robust.parameters(), **optim)

        self.gce = GceConfig(q=config.q)
        self.prior = GroupPrior(self.topology, strategy=config.strategy, alpha=config.alpha,
                                per_sample=config.per_sample_prior, frozen=config.freeze_prior)
        self.splitter = AttributeSplitter(self.topology)
        self.iteration = 0

        self.x_train = np.asarray(dataset.x_train, dtype=self.dtype)
        self.y_train = np.asarray(dataset.y_train, dtype=np.int64)
        self.x_test = np.asarray(dataset.x_test, dtype=self.dtype)

    def _check_loss(self, value: float, branch: str) -> None:
        if not np.isfinite(value):
            monitoring.track_custom_metric('nan_events', 1, tags=[branch])
            raise NumericError(f"non-finite {branch} loss at iteration {self.iteration}",
                               details={'iteration': self.iteration, 'branch': branch})

    def _apply(self, model: MlpScorer, optimizer: Adam, upstream: np.ndarray) -> None:
        grads, _ = model.backward(upstream)
        model.load_parameters(optimizer.step(model.parameters(), grads.flat()))

    def infer_attributes(self, erm_probs: np.ndarray):
        """Attribute posteriors and their argmax under the training topology."""
        weights = self.splitter.weights(erm_probs) if self.splitter.active else None
        posteriors = attribute_posterior(erm_probs, self.topology, weights)
        return posteriors, argmax_first(posteriors, axis=1)

    def erm_step(self, xb: np.ndarray, yb: np.ndarray) -> float:
        if self.hook is not None:
            self.hook('erm', xb)
        logits = self.erm.forward(xb)
        loss, grad = gce_loss_batch(logits, yb, self.gce)
        self._check_loss(loss, 'erm')
        self._apply(self.erm, self.erm_opt, grad)
        return loss

    def robust_step(self, xb: np.ndarray, yb: np.ndarray, attrs: np.ndarray, pool: np.ndarray,
                    epoch: int) -> tuple:
        """
        Mix (optionally) and update the robust branch.

        Returns:
            Tuple of (loss, number of mixed samples)
        """
        config = self.config
        table = self.prior.table
        if config.mixup_enabled:
            tau = mixup_ramp(epoch, config.rampup_epochs)
            mixed = group_mixup(xb, yb, attrs, xb[pool], yb[pool], attrs[pool], table, tau,
                                self.mixup_rng, mode=config.lambda_mode)
            x_in, rows, n_mixed = mixed.x, mixed.prior_rows, mixed.n_mixed
        else:
            x_in, rows, n_mixed = xb, table[:, attrs].T, 0

        if self.hook is not None:
            self.hook('robust', x_in)
        logits = self.robust.forward(x_in)
        if config.loss_mode == LossMode.LC:
            offsets = np.log(np.maximum(rows, config.prior_floor))
            loss, grad = lc_loss_batch(logits, yb, offsets)
        elif config.loss_mode == LossMode.REWEIGHTED_CE:
            entries = rows[np.arange(len(yb)), yb]
            loss, grad = reweighted_ce_loss_batch(logits, yb, fisher_weights(entries, config.prior_floor))
        else:
            loss, grad = ce_loss_batch(logits, yb)
        self._check_loss(loss, 'robust')
        self._apply(self.robust, self.robust_opt, grad)
        return loss, n_mixed

    def train_epoch(self, epoch: int):
        """One shuffled pass; the last batch keeps the remainder."""
        n = len(self.y_train)
        order = self.shuffle_rng.permutation(n)
        erm_total = robust_total = 0.0
        mixed_total = 0

        for start in range(0, n, self.config.batch_size):
            idx = order[start:start + self.config.batch_size]
            xb, yb = self.x_train[idx], self.y_train[idx]
            self.iteration += 1

            erm_loss = self.erm_step(xb, yb)

            # Prior and attributes come from the ERM branch after its update
            probs = softmax(self.erm.predict(xb), axis=1)
            if self.splitter.active:
                self.splitter.update(probs, yb)
            posteriors, attrs = self.infer_attributes(probs)
            skipped = self.prior.skipped_batches
            self.prior.update(probs, yb, posteriors=posteriors)
            if self.prior.skipped_batches > skipped:
                monitoring.track_custom_metric('empty_prior_batches', 1)

            pool = ~np.asarray(self.topology.is_aligned(yb, attrs), dtype=bool)
            robust_loss, n_mixed = self.robust_step(xb, yb, attrs, pool, epoch)

            erm_total += erm_loss * len(yb)
            robust_total += robust_loss * len(yb)
            mixed_total += n_mixed
            monitoring.track_custom_metric('iterations_total', 1)
            logger.debug(f"Iteration {self.iteration}: erm={erm_loss:.5f} robust={robust_loss:.5f} "
                         f"mixed={n_mixed}")

        self.prior.end_epoch()
        return erm_total / n, robust_total / n, mixed_total

    def record_epoch(self, epoch: int, erm_loss: float, robust_loss: float, mixed: int,
                     seconds: float) -> EpochRecord:
        dataset = self.dataset
        test_logits = batched_logits(self.robust, self.x_test)
        test = evaluate(self.robust, self.x_test, dataset.y_test, dataset.a_test,
                        dataset.topology, logits=test_logits)
        test_margins = margin_summary(test_logits, dataset.y_test, dataset.a_test, dataset.topology)

        train_margins = None
        if self.config.eval_train_margins:
            erm_probs = softmax(batched_logits(self.erm, self.x_train), axis=1)
            _, inferred = self.infer_attributes(erm_probs)
            train_margins = margin_summary(batched_logits(self.robust, self.x_train), self.y_train,
                                           inferred, self.topology)

        return EpochRecord(epoch=epoch, test=test, erm_loss=erm_loss, robust_loss=robust_loss,
                           test_margins=test_margins, train_margins=train_margins,
                           samples_mixed=mixed, seconds=seconds)

    def fit(self) -> TrainResult:
        config = self.config
        records: List[EpochRecord] = []
        history: List[np.ndarray] = []
        logger.info(f"Training {self.dataset.name}: loss={config.loss_mode.value} "
                    f"mixup={'on' if config.mixup_enabled else 'off'} prior={config.strategy.value} "
                    f"epochs={config.epochs} seed={config.seed}")

        for epoch in range(config.epochs):
            started = time.time()
            erm_loss, robust_loss, mixed = self.train_epoch(epoch)
            seconds = time.time() - started

            record = self.record_epoch(epoch, erm_loss, robust_loss, mixed, seconds)
            records.append(record)
            if config.dump_priors:
                history.append(self.prior.snapshot())

            monitoring.track_custom_metric('epochs_total', 1)
            monitoring.track_custom_metric('epoch_seconds', seconds)
            monitoring.track_custom_metric('samples_mixed', mixed)
            logger.info(f"Epoch {epoch + 1}/{config.epochs}: gba={record.gba:.4f} "
                        f"worst={record.worst_group:.4f} erm_loss={erm_loss:.4f} "
                        f"robust_loss={robust_loss:.4f} ({seconds:.1f}s)")

        return TrainResult(self.robust, self.erm, records, self.prior, config, self.topology,
                           iterations=self.iteration, prior_history=history)


def train(dataset: BiasedDataset, config: TrainConfig, hook: Optional[TrainHook] = None,
          out_dir: Optional[Union[str, Path]] = None) -> TrainResult:
    """
    Train both branches on a biased dataset.

    Args:
        dataset: Training and balanced test splits
        config: Hyperparameters
        hook: Optional observer of every batch each branch consumes
        out_dir: Write run outputs here when given

    Returns:
        TrainResult with the robust and ERM scorers and one record per epoch
    """
    result = TwoBranchTrainer(dataset, config, hook).fit()
    if out_dir is not None:
        from trainer.reports import write_run_outputs
        write_run_outputs(result, dataset, out_dir)
    return result
