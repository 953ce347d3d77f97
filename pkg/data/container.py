"""
BiasedDataset and its LCDS1 container.

Layout (little-endian):
    5 bytes   b"LCDS1"
    int32 x5  n, d, L, K, topology code
    float32   minority ratio
    n records of: float32[d] features, uint8 y, uint8 a, uint8 split (0 train, 1 test)

Two sidecars accompany every container: `<stem>.json` (dataset card with the
full topology) and `<stem>.manifest.csv` (`index,y,a,group,split`).
"""

import csv
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from debias.topology import CorrelationTopology, TopologyKind
from utils.digests import file_checksum
from utils.error_handlers import DatasetFormatError, ShapeError, error_handler

logger = logging.getLogger(__name__)

MAGIC = b"LCDS1"
_HEADER = struct.Struct('<5if')
SPLIT_TRAIN = 0
SPLIT_TEST = 1

PathLike = Union[str, Path]


@dataclass
class BiasedDataset:
    """
    Train split with hidden attributes and a group-balanced test split.

    `a_train_hidden` is carried for post-hoc diagnostics only; the trainer
    never reads it.
    """

    x_train: np.ndarray
    y_train: np.ndarray
    a_train_hidden: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    a_test: np.ndarray
    topology: CorrelationTopology
    minority_ratio: float
    seed: int = 0
    name: str = 'dataset'
    palette: Optional[np.ndarray] = None
    synthetic: bool = False
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.x_train.ndim != 2 or self.x_test.ndim != 2 or self.x_train.shape[1] != self.x_test.shape[1]:
            raise ShapeError("train and test features must be (n, d) with a common d",
                             expected=list(self.x_train.shape), actual=list(self.x_test.shape))
        for split, x, y, a in (('train', self.x_train, self.y_train, self.a_train_hidden),
                               ('test', self.x_test, self.y_test, self.a_test)):
            if not (len(x) == len(y) == len(a)):
                raise ShapeError(f"{split} features, labels and attributes differ in length",
                                 expected=len(x), actual=len(y))

    @property
    def n_labels(self) -> int:
        return self.topology.n_labels

    @property
    def n_attrs(self) -> int:
        return self.topology.n_attrs

    @property
    def d(self) -> int:
        return self.x_train.shape[1]

    def group_ids(self, y: np.ndarray, a: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=np.int64) * self.n_attrs + np.asarray(a, dtype=np.int64)

    def train_minority_fraction(self) -> float:
        aligned = self.topology.is_aligned(self.y_train, self.a_train_hidden)
        return float(1.0 - np.mean(aligned))

    def test_group_counts(self) -> Dict[tuple, int]:
        counts: Dict[tuple, int] = {}
        for y in range(self.n_labels):
            for a in range(self.n_attrs):
                counts[(y, a)] = int(np.sum((self.y_test == y) & (self.a_test == a)))
        return counts

    def card(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'format': MAGIC.decode('ascii'),
            'n_train': int(len(self.y_train)),
            'n_test': int(len(self.y_test)),
            'd': int(self.d),
            'minority_ratio': float(self.minority_ratio),
            'seed': int(self.seed),
            'synthetic': bool(self.synthetic),
            'topology': self.topology.to_dict(),
            'palette': None if self.palette is None else np.asarray(self.palette).tolist(),
            **self.extra,
        }


def card_path(path: PathLike) -> Path:
    return Path(path).with_suffix('.json')


def manifest_path(path: PathLike) -> Path:
    return Path(path).with_suffix('.manifest.csv')


def _record_dtype(d: int) -> np.dtype:
    return np.dtype([('x', '<f4', (d,)), ('y', 'u1'), ('a', 'u1'), ('split', 'u1')])


def encode_dataset(dataset: BiasedDataset) -> bytes:
    n_train, n_test = len(dataset.y_train), len(dataset.y_test)
    n, d = n_train + n_test, dataset.d
    if max(dataset.n_labels, dataset.n_attrs) > 256:
        raise DatasetFormatError("labels and attributes must fit in one byte")

    records = np.zeros(n, dtype=_record_dtype(d))
    records['x'][:n_train] = dataset.x_train
    records['x'][n_train:] = dataset.x_test
    records['y'][:n_train] = dataset.y_train
    records['y'][n_train:] = dataset.y_test
    records['a'][:n_train] = dataset.a_train_hidden
    records['a'][n_train:] = dataset.a_test
    records['split'][n_train:] = SPLIT_TEST

    header = _HEADER.pack(n, d, dataset.n_labels, dataset.n_attrs, dataset.topology.code,
                          dataset.minority_ratio)
    return MAGIC + header + records.tobytes()


def decode_dataset(data: bytes, card: Optional[Dict[str, Any]] = None) -> BiasedDataset:
    """
    Parse container bytes; the card supplies the topology for non one-to-one data.
    """
    if data[:4] == MAGIC[:4] and data[:5] != MAGIC:
        raise DatasetFormatError(f"unsupported dataset version {data[:5]!r}, expected {MAGIC!r}", offset=0)
    if data[:5] != MAGIC:
        raise DatasetFormatError(f"bad dataset magic {data[:5]!r}", offset=0)
    if len(data) < 5 + _HEADER.size:
        raise DatasetFormatError("truncated dataset header", offset=len(data))

    n, d, L, K, code, ratio = _HEADER.unpack_from(data, 5)
    if n < 0 or d <= 0 or L <= 0 or K <= 0:
        raise DatasetFormatError(f"invalid header n={n} d={d} L={L} K={K}", offset=5)
    dtype = _record_dtype(d)
    start = 5 + _HEADER.size
    expected = start + n * dtype.itemsize
    if len(data) < expected:
        raise DatasetFormatError(f"truncated dataset: expected {expected} bytes, found {len(data)}",
                                 offset=len(data))
    if len(data) > expected:
        raise DatasetFormatError(f"{len(data) - expected} trailing bytes after the last record", offset=expected)

    kind = TopologyKind.from_code(code)
    if card is not None and 'topology' in card:
        topology = CorrelationTopology.from_dict(card['topology'])
        if topology.code != code or topology.n_labels != L or topology.n_attrs != K:
            raise DatasetFormatError("dataset card topology disagrees with the container header", offset=5)
    elif kind == TopologyKind.ONE_TO_ONE and L == K:
        topology = CorrelationTopology.one_to_one(L)
    else:
        raise DatasetFormatError(f"{kind.value} dataset needs its card to recover the topology", offset=5)

    records = np.frombuffer(data, dtype=dtype, count=n, offset=start)
    train = records['split'] == SPLIT_TRAIN
    test = records['split'] == SPLIT_TEST
    if not (train | test).all():
        bad = int(np.flatnonzero(~(train | test))[0])
        raise DatasetFormatError(f"record {bad} has an unknown split flag", offset=start + bad * dtype.itemsize)

    card = card or {}
    palette = card.get('palette')
    extra_keys = set(card) - {'name', 'format', 'n_train', 'n_test', 'd', 'minority_ratio', 'seed',
                              'synthetic', 'topology', 'palette'}
    return BiasedDataset(
        x_train=np.array(records['x'][train], dtype=np.float32),
        y_train=records['y'][train].astype(np.int64),
        a_train_hidden=records['a'][train].astype(np.int64),
        x_test=np.array(records['x'][test], dtype=np.float32),
        y_test=records['y'][test].astype(np.int64),
        a_test=records['a'][test].astype(np.int64),
        topology=topology,
        minority_ratio=float(card.get('minority_ratio', ratio)),
        seed=int(card.get('seed', 0)),
        name=card.get('name', 'dataset'),
        palette=None if palette is None else np.asarray(palette, dtype=np.float64),
        synthetic=bool(card.get('synthetic', False)),
        extra={k: card[k] for k in extra_keys},
    )


def write_manifest(dataset: BiasedDataset, path: PathLike) -> Path:
    """CSV with one `index,y,a,group,split` row per record, in container order."""
    path = Path(path)
    with error_handler():
        with open(path, 'w', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(['index', 'y', 'a', 'group', 'split'])
            index = 0
            for split, y, a in (('train', dataset.y_train, dataset.a_train_hidden),
                                ('test', dataset.y_test, dataset.a_test)):
                groups = dataset.group_ids(y, a)
                for yi, ai, gi in zip(y.tolist(), a.tolist(), groups.tolist()):
                    writer.writerow([index, yi, ai, gi, split])
                    index += 1
    return path


def save_dataset(dataset: BiasedDataset, path: PathLike) -> Dict[str, Any]:
    """
    Write the container plus its card and manifest.

    Returns:
        The dataset card, including the container's SHA-256 checksum
    """
    path = Path(path)
    with error_handler():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_dataset(dataset))
    card = dataset.card()
    card['checksum'] = file_checksum(path)
    with error_handler():
        card_path(path).write_text(json.dumps(card, indent=2, sort_keys=True) + '\n')
    write_manifest(dataset, manifest_path(path))
    logger.info(f"Saved {dataset.name} to {path} ({len(dataset.y_train)} train, {len(dataset.y_test)} test)")
    return card


def load_dataset(path: PathLike) -> BiasedDataset:
    path = Path(path)
    with error_handler():
        data = path.read_bytes()
        card = None
        if card_path(path).exists():
            card = json.loads(card_path(path).read_text())
    card = dict(card) if card else None
    if card is not None:
        card.pop('checksum', None)
    return decode_dataset(data, card)
