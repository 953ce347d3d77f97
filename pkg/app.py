#!/usr/bin/env python3
"""
Logit-correction debiasing toolkit.
Command line for dataset generation, two-branch training, evaluation,
oracle consistency checks, run reports and ablations.

Exit codes: 0 success, 2 usage, 3 numeric failure, 4 I/O.
"""

import argparse
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional

from config.monitoring import configure_logging, init_monitoring, monitoring
from config.settings import get_settings
from utils.error_handlers import (
    EXIT_OK,
    EXIT_USAGE,
    LCError,
    StorageError,
    ValidationError,
    error_handler,
    handle_cli_error,
)

logger = logging.getLogger(__name__)

DATASETS = ('cmnist', 'cmnist-m2o', 'cmnist-o2m', 'cmnist-m2m', 'gauss')
ORACLE_MODES = ('ce', 'lc', 'rwce', 'bayes')


def create_app(environment: Optional[str] = None) -> type:
    """
    Resolve settings and start monitoring.

    Args:
        environment: Profile name; defaults to LC_ENVIRONMENT

    Returns:
        Settings class
    """
    settings = get_settings(environment)
    init_monitoring(settings)

    validation = settings.validate_config()
    for issue in validation['issues']:
        logger.error(f"Configuration issue: {issue}")
    for warning in validation['warnings']:
        logger.info(f"Configuration note: {warning}")

    logger.debug(f"Settings: {settings.get_config_summary()}")
    return settings


def _check_ratio(ratio: float) -> float:
    if not 0.0 < ratio < 1.0:
        raise ValidationError(f"--ratio must lie strictly between 0 and 1, got {ratio}",
                              details={'ratio': ratio})
    return ratio


def cmd_gen_data(args: argparse.Namespace, settings: type) -> int:
    """Build a biased dataset and write its container, card and manifest."""
    from data.colored_mnist import build_colored_mnist
    from data.container import save_dataset
    from data.gaussian import make_gaussian_toy

    ratio = _check_ratio(args.ratio)
    if args.dataset == 'gauss':
        dataset = make_gaussian_toy(n_labels=args.classes, n_attrs=args.classes, ratio=ratio,
                                    separation=args.separation, seed=args.seed,
                                    n_train=args.n_train or 5000,
                                    test_per_group=args.test_per_group or 500)
    else:
        dataset = build_colored_mnist(args.dataset, ratio, seed=args.seed,
                                      mnist_dir=args.mnist_dir or settings.MNIST_DIR,
                                      n_train=args.n_train, n_test=args.n_test,
                                      test_per_group=args.test_per_group, threads=settings.THREADS)

    card = save_dataset(dataset, args.out)
    print(f"dataset={dataset.name}")
    print(f"n_train={card['n_train']}")
    print(f"n_test={card['n_test']}")
    print(f"minority_fraction={dataset.train_minority_fraction()!r}")
    print(f"checksum={card['checksum']}")
    return EXIT_OK


def _train_config(args: argparse.Namespace, settings: type):
    from trainer.config import TrainConfig

    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        q=args.q,
        learning_rate=args.lr,
        alpha=args.alpha,
        rampup_epochs=args.rampup,
        strategy=args.prior,
        mixup_enabled=args.mixup == 'on',
        loss_mode=args.loss,
        seed=args.seed,
        hidden_width=args.hidden_width,
        dtype=args.dtype or settings.TRAIN_DTYPE,
        per_sample_prior=args.per_sample_prior,
        freeze_prior=args.freeze_prior,
        lambda_mode=args.lambda_mode,
        topology_assumption=args.topology_assumption,
        weight_decay=args.weight_decay,
        cosine_steps=args.cosine_steps,
        dump_priors=args.dump_priors,
    )


def cmd_train(args: argparse.Namespace, settings: type) -> int:
    """Train both branches and write the run directory."""
    from data.container import load_dataset
    from trainer.loop import train
    from trainer.reports import write_run_outputs

    config = _train_config(args, settings)
    out_dir = Path(args.out)
    with error_handler():
        out_dir.mkdir(parents=True, exist_ok=True)
    configure_logging(settings.LOG_LEVEL, out_dir / 'run.log', settings.LOG_FORMAT)

    dataset = load_dataset(args.data)
    started_at = datetime.now(timezone.utc).isoformat()
    result = train(dataset, config)
    manifest = write_run_outputs(result, dataset, out_dir, started_at=started_at,
                                 version=settings.VERSION, metrics=monitoring.get_run_metrics())

    print(f"final_gba={result.final_gba!r}")
    print(f"final_worst={result.final_worst!r}")
    print(f"best_gba={result.best_gba!r}")
    print(f"config_hash={manifest.config_hash}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, settings: type) -> int:
    """Group metrics of a saved scorer on a saved dataset."""
    from data.container import load_dataset
    from model.checkpoint import load_checkpoint
    from trainer.evaluation import evaluate

    model = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    if args.split == 'train':
        x, y, a = dataset.x_train, dataset.y_train, dataset.a_train_hidden
    else:
        x, y, a = dataset.x_test, dataset.y_test, dataset.a_test
    metrics = evaluate(model, x, y, a, dataset.topology)

    for (gy, ga), acc in sorted(metrics.per_group.items()):
        print(f"group_{gy}_{ga}={acc!r} (n={metrics.counts[(gy, ga)]})")
    print(f"gba={metrics.gba!r}")
    print(f"worst_group={metrics.worst_group!r}")
    print(f"overall={metrics.overall!r}")
    if metrics.minority is not None:
        print(f"minority={metrics.minority!r}")
    return EXIT_OK


def _oracle_instance(args: argparse.Namespace, index: int):
    from oracle.instance import balanced_instance, random_instance, skewed_instance

    if args.instance == 'skewed':
        return skewed_instance()
    if args.instance == 'balanced':
        return balanced_instance()
    return random_instance(args.seed + index, n_x=args.domain_size, n_labels=args.labels,
                           n_attrs=args.attrs, concentration=args.concentration,
                           one_hot=not args.no_one_hot)


def cmd_oracle_check(args: argparse.Namespace, settings: type) -> int:
    """Check the Bayes rule or a surrogate against brute-force GBA maximizers."""
    from oracle.bayes import brute_force_gba_max, gba_of_classifier, rule_decisions
    from oracle.consistency import MATCH_TOLERANCE, surrogate_consistency_check

    if args.instances < 1:
        raise ValidationError(f"--instances must be at least 1, got {args.instances}")
    if args.concentration <= 0:
        raise ValidationError(f"--concentration must be positive, got {args.concentration}")

    count = 1 if args.instance != 'random' else args.instances
    matches = 0
    for index in range(count):
        instance = _oracle_instance(args, index)
        if args.mode == 'bayes':
            _, max_gba = brute_force_gba_max(instance)
            achieved = gba_of_classifier(instance, rule_decisions(instance))
            match = achieved >= max_gba - MATCH_TOLERANCE
        else:
            result = surrogate_consistency_check(instance, args.mode)
            max_gba, achieved, match = result.max_gba, result.achieved_gba, result.match
        matches += int(match)
        print(f"{args.seed + index},{args.mode},{str(match).lower()},{max_gba:.12f},{achieved:.12f}")

    print(f"match {matches}/{count}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace, settings: type) -> int:
    """Tabulate run summaries, optionally averaged over seeds."""
    from trainer.reports import aggregate_rows, collect_runs, render_csv, report_rows, verify_run

    rows = collect_runs(args.runs)
    if args.verify:
        failed = []
        for run_dir in args.runs:
            checks = verify_run(run_dir)
            failed.extend(f"{run_dir}/{name}" for name, ok in sorted(checks.items()) if not ok)
        if failed:
            raise StorageError(f"run outputs do not match their manifests: {', '.join(failed)}",
                               details={'mismatched': failed})

    table = aggregate_rows(rows) if args.aggregate else report_rows(rows)
    text = render_csv(table)
    if args.out:
        with error_handler():
            Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace, settings: type) -> int:
    """Run an ablation study over several seeds."""
    from data.container import load_dataset
    from trainer.ablations import run_study, summarize_study
    from trainer.reports import render_csv

    base = _train_config(args, settings)
    dataset = load_dataset(args.data)
    rows = run_study(args.study, dataset, base, args.seeds, out_dir=args.out)
    summary = summarize_study(rows)
    text = render_csv([{k: repr(v) if isinstance(v, float) else str(v) for k, v in row.items()}
                       for row in summary])
    if args.out:
        with error_handler():
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / f"ablation_{args.study}.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--loss', choices=('lc', 'ce', 'rwce'), default='lc')
    parser.add_argument('--mixup', choices=('on', 'off'), default='on')
    parser.add_argument('--prior', choices=('moving', 'batch', 'dataset'), default='moving')
    parser.add_argument('--epochs', type=int, default=100)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--batch-size', type=int, default=256)
    parser.add_argument('--lr', type=float, default=1e-2)
    parser.add_argument('--q', type=float, default=0.7, help='GCE exponent of the ERM branch')
    parser.add_argument('--alpha', type=float, default=0.5, help='moving-average momentum of the prior')
    parser.add_argument('--rampup', type=int, default=2, help='mixup ramp-up epochs')
    parser.add_argument('--hidden-width', type=int, default=100)
    parser.add_argument('--dtype', choices=('float32', 'float64'), default=None)
    parser.add_argument('--per-sample-prior', action='store_true')
    parser.add_argument('--freeze-prior', action='store_true', help='keep the uniform prior')
    parser.add_argument('--lambda-mode', choices=('ramp', 'static'), default='ramp')
    parser.add_argument('--topology-assumption', choices=('exact', 'one_to_one'), default='exact')
    parser.add_argument('--weight-decay', type=float, default=0.0)
    parser.add_argument('--cosine-steps', type=int, default=None)
    parser.add_argument('--dump-priors', action='store_true')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='lc', description='Logit-correction debiasing toolkit')
    parser.add_argument('--env', default=None, help='settings profile (development, testing, production)')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen-data', help='generate a biased dataset')
    gen.add_argument('--dataset', choices=DATASETS, required=True)
    gen.add_argument('--ratio', type=float, required=True, help='minority ratio in (0, 1)')
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--out', required=True)
    gen.add_argument('--mnist-dir', default=None)
    gen.add_argument('--n-train', type=int, default=None)
    gen.add_argument('--n-test', type=int, default=None)
    gen.add_argument('--test-per-group', type=int, default=None)
    gen.add_argument('--classes', type=int, default=2, help='Gaussian toy classes')
    gen.add_argument('--separation', type=float, default=3.0, help='Gaussian toy core separation')

    tr = sub.add_parser('train', help='train both branches on a dataset')
    tr.add_argument('--data', required=True)
    tr.add_argument('--out', required=True)
    _add_training_flags(tr)

    ev = sub.add_parser('evaluate', help='group metrics of a checkpoint')
    ev.add_argument('--checkpoint', required=True)
    ev.add_argument('--data', required=True)
    ev.add_argument('--split', choices=('test', 'train'), default='test')

    oc = sub.add_parser('oracle-check', help='Bayes-rule and surrogate consistency checks')
    oc.add_argument('--instances', type=int, default=50)
    oc.add_argument('--mode', choices=ORACLE_MODES, default='lc')
    oc.add_argument('--seed', type=int, default=0)
    oc.add_argument('--instance', choices=('random', 'skewed', 'balanced'), default='random')
    oc.add_argument('--concentration', type=float, default=1.0)
    oc.add_argument('--domain-size', type=int, default=4)
    oc.add_argument('--labels', type=int, default=2)
    oc.add_argument('--attrs', type=int, default=2)
    oc.add_argument('--no-one-hot', action='store_true')

    rp = sub.add_parser('report', help='tabulate run directories')
    rp.add_argument('--runs', nargs='+', required=True)
    rp.add_argument('--aggregate', action='store_true', help='seed means per configuration')
    rp.add_argument('--verify', action='store_true', help='check outputs against run manifests')
    rp.add_argument('--out', default=None)

    ab = sub.add_parser('ablate', help='run an ablation study')
    ab.add_argument('--study', choices=('modules', 'prior', 'topology'), required=True)
    ab.add_argument('--data', required=True)
    ab.add_argument('--seeds', type=int, nargs='+', default=[0, 1, 2])
    ab.add_argument('--out', default=None)
    _add_training_flags(ab)

    return parser


COMMANDS: Dict[str, Callable[[argparse.Namespace, type], int]] = {
    'gen-data': cmd_gen_data,
    'train': cmd_train,
    'evaluate': cmd_evaluate,
    'oracle-check': cmd_oracle_check,
    'report': cmd_report,
    'ablate': cmd_ablate,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    settings = create_app(args.env)
    try:
        with error_handler():
            return COMMANDS[args.command](args, settings)
    except LCError as e:
        return handle_cli_error(e)


if __name__ == '__main__':
    sys.exit(main())
