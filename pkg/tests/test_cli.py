"""End-to-end command line runs and their exit codes."""

import numpy as np
import pytest

from app import main
from data.container import save_dataset
from data.gaussian import make_gaussian_toy
from utils.error_handlers import EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE

TRAIN_FLAGS = ['--epochs', '2', '--batch-size', '64', '--hidden-width', '8', '--dtype', 'float32']


def _output(capsys) -> dict:
    values = {}
    for line in capsys.readouterr().out.splitlines():
        if '=' in line:
            key, value = line.split('=', 1)
            values[key] = value
    return values


@pytest.fixture
def gauss_file(tmp_path, capsys):
    path = tmp_path / 'gauss.lcds'
    code = main(['gen-data', '--dataset', 'gauss', '--ratio', '0.05', '--seed', '2', '--out', str(path),
                 '--n-train', '200', '--test-per-group', '10'])
    assert code == EXIT_OK
    capsys.readouterr()
    return path


class TestGenData:

    def test_gauss(self, tmp_path, capsys):
        path = tmp_path / 'toy.lcds'
        assert main(['gen-data', '--dataset', 'gauss', '--ratio', '0.1', '--out', str(path),
                     '--n-train', '100', '--test-per-group', '5']) == EXIT_OK
        out = _output(capsys)
        assert out['n_train'] == '100'
        assert out['n_test'] == '20'
        assert len(out['checksum']) == 64
        assert path.is_file()

    @pytest.mark.parametrize('ratio', ['0', '1', '1.5'])
    def test_ratio_out_of_range(self, tmp_path, ratio):
        code = main(['gen-data', '--dataset', 'gauss', '--ratio', ratio, '--out', str(tmp_path / 'x.lcds')])
        assert code == EXIT_USAGE

    def test_unknown_dataset(self, tmp_path):
        code = main(['gen-data', '--dataset', 'cifar', '--ratio', '0.1', '--out', str(tmp_path / 'x.lcds')])
        assert code == EXIT_USAGE


class TestTrainAndEvaluate:

    def test_train_then_evaluate(self, gauss_file, tmp_path, capsys):
        run = tmp_path / 'run'
        assert main(['train', '--data', str(gauss_file), '--out', str(run)] + TRAIN_FLAGS) == EXIT_OK
        trained = _output(capsys)
        assert len(trained['config_hash']) == 16
        assert (run / 'run.log').is_file()
        assert (run / 'manifest.json').is_file()

        assert main(['evaluate', '--checkpoint', str(run / 'robust.lcmlp'), '--data', str(gauss_file)]) == EXIT_OK
        evaluated = _output(capsys)
        assert evaluated['gba'] == trained['final_gba']
        assert sum(key.startswith('group_') for key in evaluated) == 4

    def test_missing_dataset(self, tmp_path):
        code = main(['train', '--data', str(tmp_path / 'none.lcds'), '--out', str(tmp_path / 'run')] + TRAIN_FLAGS)
        assert code == EXIT_IO

    def test_invalid_hyperparameter(self, gauss_file, tmp_path):
        code = main(['train', '--data', str(gauss_file), '--out', str(tmp_path / 'run'), '--q', '1.5'])
        assert code == EXIT_USAGE

    def test_non_finite_features(self, tmp_path):
        dataset = make_gaussian_toy(ratio=0.05, seed=1, n_train=100, test_per_group=5)
        dataset.x_train[:] = np.nan
        path = tmp_path / 'broken.lcds'
        save_dataset(dataset, path)
        code = main(['train', '--data', str(path), '--out', str(tmp_path / 'run')] + TRAIN_FLAGS)
        assert code == EXIT_NUMERIC

    def test_missing_checkpoint(self, gauss_file, tmp_path):
        code = main(['evaluate', '--checkpoint', str(tmp_path / 'none.lcmlp'), '--data', str(gauss_file)])
        assert code == EXIT_IO

    def test_corrupt_checkpoint(self, gauss_file, tmp_path):
        path = tmp_path / 'bad.lcmlp'
        path.write_bytes(b'not a checkpoint')
        assert main(['evaluate', '--checkpoint', str(path), '--data', str(gauss_file)]) == EXIT_IO


class TestOracleCheck:

    def test_skewed_instance(self, capsys):
        assert main(['oracle-check', '--instance', 'skewed', '--mode', 'ce']) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        seed, mode, match, max_gba, achieved = lines[0].split(',')
        assert (seed, mode, match) == ('0', 'ce', 'false')
        assert float(achieved) < float(max_gba)
        assert lines[-1] == 'match 0/1'

        assert main(['oracle-check', '--instance', 'skewed', '--mode', 'lc']) == EXIT_OK
        assert capsys.readouterr().out.splitlines()[-1] == 'match 1/1'

    def test_bayes_rule_on_random_instances(self, capsys):
        assert main(['oracle-check', '--instances', '5', '--mode', 'bayes', '--seed', '10']) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert [line.split(',')[0] for line in lines[:-1]] == ['10', '11', '12', '13', '14']
        assert lines[-1] == 'match 5/5'

    def test_enumeration_bound(self):
        code = main(['oracle-check', '--instances', '1', '--mode', 'bayes', '--domain-size', '12',
                     '--labels', '4'])
        assert code == EXIT_USAGE

    def test_instance_count(self):
        assert main(['oracle-check', '--instances', '0']) == EXIT_USAGE


class TestReport:

    def test_report_and_verify(self, gauss_file, tmp_path, capsys):
        runs = []
        for seed in ('0', '1'):
            run = tmp_path / f"seed_{seed}"
            assert main(['train', '--data', str(gauss_file), '--out', str(run), '--seed', seed] + TRAIN_FLAGS) == 0
            runs.append(str(run))
        capsys.readouterr()

        table = tmp_path / 'table.csv'
        assert main(['report', '--runs', *runs, '--verify', '--out', str(table)]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith('loss,mixup,prior,ratio,seed,final_gba')
        assert len(lines) == 3
        assert table.read_text().splitlines() == lines

        assert main(['report', '--runs', *runs, '--aggregate']) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 2
        assert lines[1].split(',')[4] == '2'

    def test_tampered_run(self, gauss_file, tmp_path):
        run = tmp_path / 'run'
        main(['train', '--data', str(gauss_file), '--out', str(run)] + TRAIN_FLAGS)
        with open(run / 'epochs.csv', 'a') as handle:
            handle.write('9,test,0,0,1.0,1\n')
        assert main(['report', '--runs', str(run)]) == EXIT_OK
        assert main(['report', '--runs', str(run), '--verify']) == EXIT_IO

    def test_missing_run(self, tmp_path):
        assert main(['report', '--runs', str(tmp_path / 'nowhere')]) == EXIT_IO


def test_ablation(gauss_file, tmp_path, capsys):
    out = tmp_path / 'ablation'
    code = main(['ablate', '--study', 'modules', '--data', str(gauss_file), '--seeds', '0', '--out', str(out),
                 '--epochs', '1', '--batch-size', '64', '--hidden-width', '8'])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert [line.split(',')[0] for line in lines[1:]] == ['ce', 'ce+mixup', 'lc', 'lc+mixup']
    assert (out / 'ablation_modules.csv').is_file()
    assert (out / 'lc+mixup' / 'seed_0' / 'summary.txt').is_file()


def test_missing_command():
    assert main([]) == EXIT_USAGE
