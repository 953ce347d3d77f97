#!/usr/bin/env python3
"""
Desk-scale reproduction runner.
Runs the oracle checks, the Gaussian toy, and the Colored-MNIST experiments
and checks each against its expected direction.
"""

import json
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from config.settings import get_settings  # noqa: E402
from data.colored_mnist import build_colored_mnist  # noqa: E402
from data.container import BiasedDataset  # noqa: E402
from data.gaussian import make_gaussian_toy  # noqa: E402
from oracle.bayes import brute_force_gba_max, gba_of_classifier, rule_decisions  # noqa: E402
from oracle.consistency import MATCH_TOLERANCE, surrogate_consistency_check  # noqa: E402
from oracle.instance import random_instance, skewed_instance  # noqa: E402
from trainer.config import TrainConfig  # noqa: E402
from trainer.loop import TrainResult, train  # noqa: E402

# Setup logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

SEEDS = (0, 1, 2)


@dataclass(frozen=True)
class ReproductionScale:
    """Sizes of the desk-scale runs."""

    gauss_epochs: int = 30
    gauss_train: int = 5000
    cmnist_epochs: int = 15
    cmnist_train: Optional[int] = 30000
    cmnist_test_per_group: Optional[int] = 50
    oracle_instances: int = 50
    consistency_instances: int = 20


QUICK_SCALE = ReproductionScale(gauss_epochs=10, gauss_train=2000, cmnist_epochs=4, cmnist_train=5000,
                                cmnist_test_per_group=20, oracle_instances=10, consistency_instances=5)


def mean_final_gba(dataset: BiasedDataset, config: TrainConfig, seeds: Sequence[int] = SEEDS
                   ) -> Tuple[float, List[TrainResult]]:
    """Train once per seed and average the final GBA."""
    results = [train(dataset, replace(config, seed=seed)) for seed in seeds]
    return float(np.mean([r.final_gba for r in results])), results


def oracle_rule_matches(n_instances: int, n_x: int = 6) -> int:
    """Number of random two-class instances where the group-balanced Bayes rule attains the maximum."""
    matches = 0
    for seed in range(n_instances):
        instance = random_instance(seed, n_x=int(np.random.default_rng(seed).integers(2, n_x + 1)))
        _, best = brute_force_gba_max(instance)
        matches += int(gba_of_classifier(instance, rule_decisions(instance)) >= best - MATCH_TOLERANCE)
    return matches


def lc_consistency_matches(n_instances: int) -> int:
    return sum(int(surrogate_consistency_check(random_instance(seed), 'lc').match) for seed in range(n_instances))


def gaussian_gap(scale: ReproductionScale, seeds: Sequence[int] = SEEDS) -> Tuple[float, float]:
    """Mean final GBA of (LC, CE) on the Gaussian toy with one percent minority."""
    dataset = make_gaussian_toy(ratio=0.01, seed=0, n_train=scale.gauss_train)
    base = TrainConfig(epochs=scale.gauss_epochs, batch_size=128, mixup_enabled=False, dtype='float64')
    lc, _ = mean_final_gba(dataset, replace(base, loss_mode='lc'), seeds)
    ce, _ = mean_final_gba(dataset, replace(base, loss_mode='ce'), seeds)
    return lc, ce


def cmnist(kind: str, ratio: float, scale: ReproductionScale, mnist_dir: Optional[str]) -> BiasedDataset:
    return build_colored_mnist(kind, ratio, seed=0, mnist_dir=mnist_dir, n_train=scale.cmnist_train,
                               test_per_group=scale.cmnist_test_per_group)


class ReproductionManager:
    """Runs reproduction steps and records their numbers."""

    def __init__(self, scale: ReproductionScale = ReproductionScale(), out_dir: Optional[str] = None,
                 environment: Optional[str] = None):
        """
        Initialize reproduction manager.

        Args:
            scale: Run sizes
            out_dir: Directory for results.json
            environment: Settings profile
        """
        self.settings = get_settings(environment)
        self.scale = scale
        self.out_dir = Path(out_dir or self.settings.OUTPUT_DIR) / 'reproduction'
        self.results: Dict[str, Any] = {}
        self._datasets: Dict[Tuple[str, float], BiasedDataset] = {}

    def _dataset(self, kind: str, ratio: float) -> BiasedDataset:
        key = (kind, ratio)
        if key not in self._datasets:
            self._datasets[key] = cmnist(kind, ratio, self.scale, self.settings.MNIST_DIR)
        return self._datasets[key]

    def _base(self) -> TrainConfig:
        return TrainConfig(epochs=self.scale.cmnist_epochs, dtype=self.settings.TRAIN_DTYPE)

    def validate_environment(self) -> bool:
        validation = self.settings.validate_config()
        for issue in validation['issues']:
            logger.error(f"  - {issue}")
        for warning in validation['warnings']:
            logger.warning(f"  - {warning}")
        return validation['valid']

    def oracle_checks(self) -> bool:
        n = self.scale.oracle_instances
        rule = oracle_rule_matches(n)
        m = self.scale.consistency_instances
        lc = lc_consistency_matches(m)
        ce_skewed = surrogate_consistency_check(skewed_instance(), 'ce').match
        self.results['oracle'] = {'rule': f"{rule}/{n}", 'lc': f"{lc}/{m}", 'ce_skewed_match': ce_skewed}
        logger.info(f"Bayes rule {rule}/{n}, LC consistency {lc}/{m}, CE on skewed instance match={ce_skewed}")
        return rule == n and lc == m and not ce_skewed

    def gaussian_toy(self) -> bool:
        lc, ce = gaussian_gap(self.scale)
        self.results['gaussian'] = {'lc': lc, 'ce': ce}
        logger.info(f"Gaussian toy: LC {lc:.4f} vs CE {ce:.4f}")
        return lc >= ce + 0.10

    def colored_mnist(self) -> bool:
        dataset = self._dataset('cmnist', 0.01)
        base = self._base()
        lc, lc_runs = mean_final_gba(dataset, replace(base, loss_mode='lc'))
        ce, ce_runs = mean_final_gba(dataset, replace(base, loss_mode='ce', mixup_enabled=False))
        lc_ratios = [r.records[-1].test_margins.ratio for r in lc_runs if r.records[-1].test_margins]
        ce_ratios = [r.records[-1].test_margins.ratio for r in ce_runs if r.records[-1].test_margins]
        self.results['cmnist_0.01'] = {'lc': lc, 'ce': ce, 'lc_margin_ratio': lc_ratios,
                                       'ce_margin_ratio': ce_ratios}
        logger.info(f"Colored-MNIST 1%: LC {lc:.4f} vs CE {ce:.4f}; margin ratios LC {lc_ratios} CE {ce_ratios}")
        margins_ok = all(r > 1 for r in ce_ratios) and all(r < 1 for r in lc_ratios)
        return ce <= 0.70 and lc >= ce + 0.15 and margins_ok

    def colored_mnist_five_percent(self) -> bool:
        lc, _ = mean_final_gba(self._dataset('cmnist', 0.05), self._base())
        self.results['cmnist_0.05'] = {'lc': lc}
        logger.info(f"Colored-MNIST 5%: LC {lc:.4f}")
        return lc >= 0.82

    def prior_ablation(self) -> bool:
        dataset = self._dataset('cmnist', 0.005)
        moving, _ = mean_final_gba(dataset, replace(self._base(), strategy='moving'))
        whole, _ = mean_final_gba(dataset, replace(self._base(), strategy='dataset'))
        self.results['prior'] = {'moving': moving, 'dataset': whole}
        logger.info(f"Prior ablation: moving {moving:.4f} vs dataset {whole:.4f}")
        return moving >= whole

    def module_ablation(self) -> bool:
        dataset = self._dataset('cmnist', 0.01)
        scores = {}
        for name, loss, mixup in (('ce', 'ce', False), ('ce+mixup', 'ce', True),
                                  ('lc', 'lc', False), ('lc+mixup', 'lc', True)):
            scores[name], _ = mean_final_gba(dataset, replace(self._base(), loss_mode=loss, mixup_enabled=mixup))
        self.results['modules'] = scores
        logger.info(f"Module ablation: {scores}")
        return (scores['lc+mixup'] >= scores['lc'] >= scores['ce']
                and scores['ce+mixup'] >= scores['ce'])

    def topology_generalization(self) -> bool:
        ok = True
        for kind in ('cmnist-m2o', 'cmnist-o2m'):
            dataset = self._dataset(kind, 0.01)
            ce, _ = mean_final_gba(dataset, replace(self._base(), loss_mode='ce', mixup_enabled=False))
            lc, _ = mean_final_gba(dataset, replace(self._base(), topology_assumption='one_to_one'))
            exact, _ = mean_final_gba(dataset, self._base())
            self.results[kind] = {'ce': ce, 'lc': lc, 'lc+': exact}
            logger.info(f"{kind}: CE {ce:.4f}, LC {lc:.4f}, LC+ {exact:.4f}")
            ok = ok and lc >= ce + 0.10 and exact >= ce + 0.10
        return ok

    def save_results(self) -> bool:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / 'results.json'
        path.write_text(json.dumps(self.results, indent=2, sort_keys=True, default=float) + '\n')
        logger.info(f"Results written to {path}")
        return True

    def steps(self) -> List[Tuple[str, Callable[[], bool]]]:
        return [
            ("Validate environment", self.validate_environment),
            ("Oracle checks", self.oracle_checks),
            ("Gaussian toy", self.gaussian_toy),
            ("Colored-MNIST 1%", self.colored_mnist),
            ("Colored-MNIST 5%", self.colored_mnist_five_percent),
            ("Prior strategy ablation", self.prior_ablation),
            ("Module ablation", self.module_ablation),
            ("Topology generalization", self.topology_generalization),
        ]

    def reproduce(self, only: Optional[Sequence[str]] = None) -> bool:
        """
        Run the selected steps; every step runs even after a failure.

        Returns:
            True if every step met its expectation
        """
        failed = []
        for step_name, step_func in self.steps():
            if only and step_name not in only:
                continue
            logger.info(f"Executing: {step_name}")
            try:
                if step_func():
                    logger.info(f"Completed: {step_name}")
                else:
                    logger.error(f"Expectation not met: {step_name}")
                    failed.append(step_name)
            except Exception as e:
                logger.error(f"Step '{step_name}' failed with exception: {e}")
                failed.append(step_name)

        self.results['failed'] = failed
        self.save_results()
        return not failed


def main():
    """Main reproduction function."""
    import argparse

    parser = argparse.ArgumentParser(description='Run desk-scale reproductions')
    parser.add_argument('--environment', '-e', default=None,
                        choices=['development', 'testing', 'production'],
                        help='Settings profile')
    parser.add_argument('--quick', action='store_true',
                        help='Smaller runs for a smoke test; expectations may not hold')
    parser.add_argument('--step', action='append', default=None,
                        help='Run only this step (repeatable)')
    parser.add_argument('--out', default=None,
                        help='Output directory')

    args = parser.parse_args()

    manager = ReproductionManager(QUICK_SCALE if args.quick else ReproductionScale(), args.out, args.environment)
    success = manager.reproduce(args.step)

    if success:
        logger.info("All reproductions met their expectations")
        sys.exit(0)
    else:
        logger.error(f"Reproductions failed: {manager.results['failed']}")
        sys.exit(1)


if __name__ == '__main__':
    main()
