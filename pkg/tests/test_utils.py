"""Error conversion and content digests."""

import numpy as np
import pytest

from utils.digests import (
    FNV64_OFFSET,
    blob_digest,
    canonical_config_text,
    config_hash,
    file_checksum,
    fnv1a_64,
    outputs_digest,
    verify_outputs,
)
from utils.error_handlers import (
    EXIT_IO,
    EXIT_NUMERIC,
    EXIT_USAGE,
    CheckpointFormatError,
    ConfigurationError,
    NumericError,
    StorageError,
    ValidationError,
    convert_exception,
    error_handler,
    handle_cli_error,
)


class TestErrors:

    def test_exit_codes(self):
        assert ConfigurationError('bad').exit_code == EXIT_USAGE
        assert NumericError('nan').exit_code == EXIT_NUMERIC
        assert CheckpointFormatError('short', offset=6).exit_code == EXIT_IO

    def test_format_errors_carry_offsets(self):
        error = CheckpointFormatError('truncated', offset=10)
        assert error.offset == 10
        assert error.to_dict() == {'error': 'checkpoint_format_error', 'message': 'truncated',
                                   'details': {'offset': 10}}
        assert 'details' not in CheckpointFormatError('bad').to_dict()

    def test_missing_file_becomes_storage_error(self, tmp_path):
        missing = tmp_path / 'absent.bin'
        with pytest.raises(StorageError) as info:
            with error_handler():
                missing.read_bytes()
        assert info.value.details == {'path': str(missing)}
        assert isinstance(info.value.__cause__, FileNotFoundError)

    def test_toolkit_errors_pass_through(self):
        with pytest.raises(ValidationError):
            with error_handler():
                raise ValidationError('bad value')

    def test_unrelated_errors_pass_through(self):
        with pytest.raises(KeyError):
            with error_handler():
                raise KeyError('x')

    def test_floating_point_errors(self):
        with pytest.raises(NumericError):
            with error_handler(), np.errstate(divide='raise'):
                np.float64(1.0) / np.float64(0.0)

    def test_convert_exception(self):
        assert isinstance(convert_exception(OSError('disk')), StorageError)
        assert convert_exception(ValueError('x')) is None

    def test_cli_error_logging(self, caplog):
        assert handle_cli_error(StorageError('cannot write')) == EXIT_IO
        assert 'cannot write' in caplog.text


class TestDigests:

    def test_fnv1a_reference_values(self):
        assert fnv1a_64(b'') == FNV64_OFFSET
        assert fnv1a_64(b'a') == 0xaf63dc4c8601ec8c

    def test_canonical_text_ignores_key_order(self):
        assert canonical_config_text({'b': 1, 'a': [1, 2]}) == '{"a":[1,2],"b":1}'
        assert config_hash({'b': 1, 'a': 2}) == config_hash({'a': 2, 'b': 1})
        assert config_hash({'a': 1}) != config_hash({'a': 2})
        assert len(config_hash({})) == 16

    def test_blob_digest_matches_git(self):
        assert blob_digest(b'') == 'e69de29bb2d1d6434b8b29ae775ad8c2e48c5391'
        assert blob_digest(b'hello\n') == 'ce013625030ba8dba906f756967f9e9ca394464a'

    def test_file_checksum(self, tmp_path):
        path = tmp_path / 'abc.txt'
        path.write_bytes(b'abc')
        assert file_checksum(path) == 'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad'

    def test_outputs_digest_and_verify(self, tmp_path):
        (tmp_path / 'sub').mkdir()
        files = [tmp_path / 'a.csv', tmp_path / 'sub' / 'b.txt']
        for path in files:
            path.write_text(path.name)
        recorded = outputs_digest(files, tmp_path)
        assert sorted(recorded) == ['*', 'a.csv', 'sub/b.txt']
        assert verify_outputs(recorded, tmp_path) == {'a.csv': True, 'sub/b.txt': True}

        files[0].write_text('changed')
        files[1].unlink()
        assert verify_outputs(recorded, tmp_path) == {'a.csv': False, 'sub/b.txt': False}
