"""
Run directory outputs and their aggregation.

A run directory holds:
    epochs.csv          epoch,split,group_y,group_a,accuracy,n
    margins_test.csv    epoch,majority_mean,minority_mean,ratio,majority_min,minority_min
    margins_train.csv   same columns, train split with inferred attributes
    summary.txt         key=value lines
    robust.lcmlp        robust-branch checkpoint
    erm.lcmlp           ERM-branch checkpoint
    priors/             prior_epoch_XXX.csv when prior dumps are enabled
    manifest.json       RunManifest
"""

import csv
import hashlib
import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from data.container import BiasedDataset, encode_dataset
from debias.prior import table_to_csv
from model.checkpoint import save_checkpoint
from utils.digests import outputs_digest, verify_outputs
from utils.error_handlers import StorageError, error_handler

if TYPE_CHECKING:
    from trainer.loop import TrainResult

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MARGIN_COLUMNS = ['majority_mean', 'minority_mean', 'ratio', 'majority_min', 'minority_min']
REPORT_KEYS = ('loss', 'mixup', 'prior', 'ratio', 'seed')
REPORT_METRICS = ('final_gba', 'final_worst', 'best_gba', 'final_minority')


@dataclass
class RunManifest:
    """Provenance of a run directory."""

    config: Dict[str, Any]
    config_hash: str
    dataset: str
    dataset_checksum: str
    outputs: Dict[str, str]
    started_at: str
    finished_at: str
    version: str = 'unknown'
    metrics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunManifest':
        return cls(**data)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _format(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_epochs_csv(result: 'TrainResult', path: Path) -> Path:
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['epoch', 'split', 'group_y', 'group_a', 'accuracy', 'n'])
        for record in result.records:
            for (gy, ga), acc in sorted(record.test.per_group.items()):
                writer.writerow([record.epoch, 'test', gy, ga, repr(acc), record.test.counts[(gy, ga)]])
    return path


def write_margins_csv(result: 'TrainResult', path: Path, split: str) -> Path:
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['epoch'] + MARGIN_COLUMNS)
        for record in result.records:
            summary = record.test_margins if split == 'test' else record.train_margins
            if summary is None:
                continue
            row = summary.as_row()
            writer.writerow([record.epoch] + [repr(float(row[c])) for c in MARGIN_COLUMNS])
    return path


def summary_values(result: 'TrainResult', dataset: BiasedDataset) -> Dict[str, Any]:
    config = result.config
    last = result.records[-1]
    values = {
        'final_gba': result.final_gba,
        'final_worst': result.final_worst,
        'best_gba': result.best_gba,
        'final_minority': result.final_minority,
        'final_overall': last.test.overall,
        'seed': config.seed,
        'config_hash': config.config_hash(),
        'loss': config.loss_mode.value,
        'mixup': 'on' if config.mixup_enabled else 'off',
        'prior': config.strategy.value,
        'ratio': dataset.minority_ratio,
        'dataset': dataset.name,
        'epochs': len(result.records),
        'iterations': result.iterations,
    }
    if last.test_margins is not None:
        values['final_margin_ratio'] = last.test_margins.ratio
    return values


def write_summary(values: Dict[str, Any], path: Path) -> Path:
    path.write_text(''.join(f"{key}={_format(value)}\n" for key, value in values.items()))
    return path


def read_summary(path: PathLike) -> Dict[str, str]:
    """Parse `key=value` lines; values stay strings."""
    values = {}
    with error_handler():
        text = Path(path).read_text()
    for line in text.splitlines():
        if '=' in line:
            key, value = line.split('=', 1)
            values[key.strip()] = value.strip()
    return values


def dataset_checksum(dataset: BiasedDataset) -> str:
    """SHA-256 of the dataset's LCDS1 encoding (equals the checksum of its saved file)."""
    return hashlib.sha256(encode_dataset(dataset)).hexdigest()


def write_run_outputs(result: 'TrainResult', dataset: BiasedDataset, out_dir: PathLike,
                      started_at: Optional[str] = None, version: str = 'unknown',
                      metrics: Optional[Dict[str, Any]] = None) -> RunManifest:
    """
    Write every run output and the manifest recording their digests.

    Args:
        result: Finished training run
        dataset: Dataset the run trained on
        out_dir: Run directory, created if missing
        started_at: ISO timestamp of the start of training
        version: Toolkit version recorded in the manifest
        metrics: Run counters to record

    Returns:
        The written RunManifest
    """
    out_dir = Path(out_dir)
    written: List[Path] = []
    with error_handler():
        out_dir.mkdir(parents=True, exist_ok=True)
        written.append(write_epochs_csv(result, out_dir / 'epochs.csv'))
        written.append(write_margins_csv(result, out_dir / 'margins_test.csv', 'test'))
        written.append(write_margins_csv(result, out_dir / 'margins_train.csv', 'train'))
        written.append(write_summary(summary_values(result, dataset), out_dir / 'summary.txt'))
        written.append(save_checkpoint(result.robust, out_dir / 'robust.lcmlp'))
        written.append(save_checkpoint(result.erm, out_dir / 'erm.lcmlp'))
        for epoch, table in enumerate(result.prior_history):
            prior_path = out_dir / 'priors' / f"prior_epoch_{epoch:03d}.csv"
            prior_path.parent.mkdir(parents=True, exist_ok=True)
            prior_path.write_text(table_to_csv(table))
            written.append(prior_path)

        manifest = RunManifest(
            config=result.config.to_dict(),
            config_hash=result.config.config_hash(),
            dataset=dataset.name,
            dataset_checksum=dataset_checksum(dataset),
            outputs=outputs_digest(written, out_dir),
            started_at=started_at or _utc_now(),
            finished_at=_utc_now(),
            version=version,
            metrics=metrics or {},
        )
        (out_dir / 'manifest.json').write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + '\n')

    logger.info(f"Wrote run outputs to {out_dir} (final_gba={result.final_gba:.4f})")
    return manifest


def load_manifest(run_dir: PathLike) -> RunManifest:
    with error_handler():
        data = json.loads((Path(run_dir) / 'manifest.json').read_text())
    return RunManifest.from_dict(data)


def verify_run(run_dir: PathLike) -> Dict[str, bool]:
    """Compare a run directory's files against the digests in its manifest."""
    manifest = load_manifest(run_dir)
    with error_handler():
        return verify_outputs(manifest.outputs, run_dir)


def collect_runs(run_dirs: Iterable[PathLike]) -> List[Dict[str, str]]:
    """
    Read summary.txt from every run directory.

    Raises:
        StorageError: listing every directory without a summary
    """
    rows, missing = [], []
    for run_dir in run_dirs:
        path = Path(run_dir) / 'summary.txt'
        if not path.is_file():
            missing.append(str(run_dir))
            continue
        row = read_summary(path)
        row['run'] = str(run_dir)
        rows.append(row)
    if missing:
        raise StorageError(f"missing run directories or summaries: {', '.join(missing)}",
                           details={'missing': missing})
    return rows


def _key(row: Dict[str, str], keys: Tuple[str, ...]) -> Tuple[str, ...]:
    return tuple(row.get(k, '') for k in keys)


def report_rows(rows: List[Dict[str, str]]) -> List[Dict[str, str]]:
    """One row per run, sorted by (loss, mixup, prior, ratio, seed)."""
    out = []
    for row in sorted(rows, key=lambda r: _key(r, REPORT_KEYS)):
        out.append({k: row.get(k, '') for k in REPORT_KEYS + REPORT_METRICS})
    return out


def aggregate_rows(rows: List[Dict[str, str]]) -> List[Dict[str, str]]:
    """Seed means and standard deviations per (loss, mixup, prior, ratio)."""
    keys = REPORT_KEYS[:-1]
    grouped: Dict[Tuple[str, ...], List[Dict[str, str]]] = defaultdict(list)
    for row in rows:
        grouped[_key(row, keys)].append(row)

    out = []
    for key in sorted(grouped):
        members = grouped[key]
        entry = dict(zip(keys, key))
        entry['seeds'] = str(len(members))
        for metric in REPORT_METRICS:
            values = [float(m[metric]) for m in members if m.get(metric)]
            entry[f"{metric}_mean"] = repr(float(np.mean(values))) if values else ''
            entry[f"{metric}_std"] = repr(float(np.std(values))) if values else ''
        out.append(entry)
    return out


def render_csv(rows: List[Dict[str, str]]) -> str:
    if not rows:
        return ''
    columns = list(rows[0])
    lines = [','.join(columns)]
    for row in rows:
        lines.append(','.join(str(row.get(c, '')) for c in columns))
    return '\n'.join(lines) + '\n'
