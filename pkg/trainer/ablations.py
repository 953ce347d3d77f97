"""
Named ablation studies: which components matter, which prior strategy,
and whether knowing the exact topology helps.
"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from data.container import BiasedDataset
from trainer.config import LossMode, TopologyAssumption, TrainConfig
from trainer.loop import train
from utils.error_handlers import ValidationError

logger = logging.getLogger(__name__)

Variant = Tuple[str, Dict[str, Any]]

STUDIES: Dict[str, List[Variant]] = {
    'modules': [
        ('ce', {'loss_mode': LossMode.CE, 'mixup_enabled': False}),
        ('ce+mixup', {'loss_mode': LossMode.CE, 'mixup_enabled': True}),
        ('lc', {'loss_mode': LossMode.LC, 'mixup_enabled': False}),
        ('lc+mixup', {'loss_mode': LossMode.LC, 'mixup_enabled': True}),
    ],
    'prior': [
        ('moving', {'strategy': 'moving'}),
        ('batch', {'strategy': 'batch'}),
        ('dataset', {'strategy': 'dataset'}),
        ('uniform', {'freeze_prior': True}),
    ],
    'topology': [
        ('ce', {'loss_mode': LossMode.CE}),
        ('lc', {'loss_mode': LossMode.LC, 'topology_assumption': TopologyAssumption.ONE_TO_ONE}),
        ('lc+', {'loss_mode': LossMode.LC, 'topology_assumption': TopologyAssumption.EXACT}),
    ],
}


def run_study(study: str, dataset: BiasedDataset, base: TrainConfig, seeds: Sequence[int],
              out_dir: Optional[Union[str, Path]] = None) -> List[Dict[str, Any]]:
    """
    Train every variant of a study once per seed.

    Args:
        study: One of STUDIES
        dataset: Dataset shared by all runs
        base: Configuration the variants override
        seeds: Training seeds
        out_dir: When given, each run writes to out_dir/<variant>/seed_<seed>

    Returns:
        One row per (variant, seed) with final_gba, best_gba and final_worst
    """
    if study not in STUDIES:
        raise ValidationError(f"unknown ablation study {study!r}, expected one of {sorted(STUDIES)}")

    rows = []
    for name, overrides in STUDIES[study]:
        for seed in seeds:
            config = replace(base, seed=seed, **overrides)
            run_dir = None if out_dir is None else Path(out_dir) / name / f"seed_{seed}"
            result = train(dataset, config, out_dir=run_dir)
            rows.append({
                'study': study,
                'variant': name,
                'seed': seed,
                'final_gba': result.final_gba,
                'best_gba': result.best_gba,
                'final_worst': result.final_worst,
            })
            logger.info(f"{study}/{name} seed={seed}: final_gba={result.final_gba:.4f}")
    return rows


def summarize_study(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Seed means per variant, in study order."""
    order: List[str] = []
    for row in rows:
        if row['variant'] not in order:
            order.append(row['variant'])

    out = []
    for name in order:
        members = [r for r in rows if r['variant'] == name]
        out.append({
            'variant': name,
            'seeds': len(members),
            'final_gba_mean': float(np.mean([r['final_gba'] for r in members])),
            'final_gba_std': float(np.std([r['final_gba'] for r in members])),
            'best_gba_mean': float(np.mean([r['best_gba'] for r in members])),
            'final_worst_mean': float(np.mean([r['final_worst'] for r in members])),
        })
    return out
