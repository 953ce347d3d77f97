"""Desk-scale reproductions; the training ones need --runslow."""

import json

import pytest

from scripts.reproduce import (
    QUICK_SCALE,
    ReproductionManager,
    ReproductionScale,
    gaussian_gap,
    lc_consistency_matches,
    oracle_rule_matches,
)


def test_oracle_step(tmp_path):
    manager = ReproductionManager(QUICK_SCALE, out_dir=str(tmp_path), environment='testing')
    assert manager.reproduce(only=['Oracle checks'])

    results = json.loads((tmp_path / 'reproduction' / 'results.json').read_text())
    assert results['oracle'] == {'rule': '10/10', 'lc': '5/5', 'ce_skewed_match': False}
    assert results['failed'] == []


def test_failed_steps_are_recorded(tmp_path, monkeypatch):
    manager = ReproductionManager(QUICK_SCALE, out_dir=str(tmp_path), environment='testing')
    monkeypatch.setattr(manager, 'gaussian_toy', lambda: False)
    assert not manager.reproduce(only=['Validate environment', 'Gaussian toy'])
    assert manager.results['failed'] == ['Gaussian toy']


@pytest.mark.slow
def test_bayes_rule_and_lc_consistency():
    assert oracle_rule_matches(50) == 50
    assert lc_consistency_matches(20) == 20


@pytest.mark.slow
def test_gaussian_toy_gap():
    lc, ce = gaussian_gap(ReproductionScale())
    assert lc >= ce + 0.10


@pytest.mark.slow
@pytest.mark.parametrize('step', ['Colored-MNIST 1%', 'Colored-MNIST 5%', 'Prior strategy ablation',
                                  'Module ablation', 'Topology generalization'])
def test_colored_mnist_expectations(tmp_path, step):
    manager = ReproductionManager(out_dir=str(tmp_path), environment='testing')
    assert manager.reproduce(only=[step]), manager.results
