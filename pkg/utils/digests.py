"""
Content digests for reproducible runs.
Canonical config text, FNV-1a config hashes, and git-style output hashes.
"""

import hashlib
import hmac
import json
from pathlib import Path
from typing import Dict, Any, Iterable, Union

FNV64_OFFSET = 0xcbf29ce484222325
FNV64_PRIME = 0x100000001b3
_MASK64 = 0xFFFFFFFFFFFFFFFF

PathLike = Union[str, Path]


def canonical_config_text(config: Dict[str, Any]) -> str:
    """
    Create the canonical text form of a resolved configuration.

    Args:
        config: Configuration as a JSON-serializable dictionary

    Returns:
        Key-sorted compact JSON text
    """
    return json.dumps(config, sort_keys=True, separators=(',', ':'))


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    value = FNV64_OFFSET
    for byte in data:
        value ^= byte
        value = (value * FNV64_PRIME) & _MASK64
    return value


def config_hash(config: Dict[str, Any]) -> str:
    """
    Hash a configuration dictionary.

    Args:
        config: Configuration as a JSON-serializable dictionary

    Returns:
        16-character lowercase hex FNV-1a digest of the canonical text
    """
    return f"{fnv1a_64(canonical_config_text(config).encode('utf-8')):016x}"


def blob_digest(content: bytes) -> str:
    """Git-style blob SHA-1 (`git hash-object` of the content)."""
    header = f"blob {len(content)}\0".encode('utf-8')
    return hashlib.sha1(header + content).hexdigest()


def file_checksum(path: PathLike) -> str:
    """SHA-256 of a file, streamed in 1 MiB chunks."""
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def outputs_digest(paths: Iterable[PathLike], root: PathLike) -> Dict[str, str]:
    """
    Compute blob digests for run outputs, keyed by path relative to root.

    Args:
        paths: Files to hash
        root: Directory the keys are made relative to

    Returns:
        Mapping of relative POSIX path to blob digest, plus a combined '*' entry
    """
    root = Path(root)
    digests = {}
    for path in sorted(Path(p) for p in paths):
        digests[path.relative_to(root).as_posix()] = blob_digest(path.read_bytes())

    combined = ''.join(f"{name} {value}\n" for name, value in sorted(digests.items()))
    digests['*'] = blob_digest(combined.encode('utf-8'))
    return digests


def verify_outputs(recorded: Dict[str, str], root: PathLike) -> Dict[str, bool]:
    """
    Check files under root against digests recorded in a run manifest.

    Args:
        recorded: Mapping produced by outputs_digest
        root: Run directory

    Returns:
        Mapping of relative path to match flag (missing files are False)
    """
    root = Path(root)
    results = {}
    for name, expected in recorded.items():
        if name == '*':
            continue
        path = root / name
        if not path.exists():
            results[name] = False
            continue
        actual = blob_digest(path.read_bytes())
        results[name] = hmac.compare_digest(actual, expected)
    return results
