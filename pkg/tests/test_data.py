"""IDX ingestion, biased dataset construction and the LCDS1 container."""

import csv
import gzip
import json
import struct

import numpy as np
import pytest

from data.colored_mnist import (
    CHANNEL_FLOOR,
    DATASET_TOPOLOGIES,
    PALETTE,
    DigitSplits,
    assign_train_attributes,
    build_colored_mnist,
    colorize,
    default_palette,
    load_digits,
    make_colored_mnist,
)
from data.container import (
    MAGIC,
    BiasedDataset,
    card_path,
    decode_dataset,
    encode_dataset,
    load_dataset,
    manifest_path,
    save_dataset,
)
from data.gaussian import SPURIOUS_SEPARATION, class_means, gaussian_bayes_gba, make_gaussian_toy
from data.glyphs import make_glyph_digits, slant
from data.idx import IMAGE_MAGIC, LABEL_MAGIC, load_idx, load_mnist, parse_idx_images, parse_idx_labels
from debias.topology import CorrelationTopology
from utils.error_handlers import (
    ConfigurationError,
    DatasetFormatError,
    IdxFormatError,
    ShapeError,
    StorageError,
    TopologyError,
    ValidationError,
)


def _image_file(pixels, n, rows, cols):
    return struct.pack('>IIII', IMAGE_MAGIC, n, rows, cols) + bytes(pixels)


def _label_file(labels):
    return struct.pack('>II', LABEL_MAGIC, len(labels)) + bytes(labels)


def _glyph_digits(n_train=300, n_test=220):
    return DigitSplits(*make_glyph_digits(n_train, n_test, seed=0), synthetic=True)


def _small_dataset(topology=None, n_train=5, n_test=4, d=3):
    topology = topology or CorrelationTopology.one_to_one(2)
    rng = np.random.default_rng(0)
    return BiasedDataset(
        x_train=rng.standard_normal((n_train, d)).astype(np.float32),
        y_train=rng.integers(topology.n_labels, size=n_train),
        a_train_hidden=rng.integers(topology.n_attrs, size=n_train),
        x_test=rng.standard_normal((n_test, d)).astype(np.float32),
        y_test=rng.integers(topology.n_labels, size=n_test),
        a_test=rng.integers(topology.n_attrs, size=n_test),
        topology=topology,
        minority_ratio=0.25,
        seed=7,
        name='small',
    )


class TestIdx:

    def test_decodes_pixels_to_unit_range(self):
        pixels = [0, 255, 128, 0, 10, 20, 30, 40]
        images = parse_idx_images(_image_file(pixels, 2, 2, 2))
        assert images.shape == (2, 2, 2)
        assert images.dtype == np.float32
        np.testing.assert_allclose(images[0], [[0.0, 1.0], [128 / 255, 0.0]], rtol=1e-6)

    def test_labels(self):
        np.testing.assert_array_equal(parse_idx_labels(_label_file([3, 1, 4])), [3, 1, 4])

    def test_labels_with_image_magic(self):
        with pytest.raises(IdxFormatError) as info:
            parse_idx_labels(struct.pack('>II', IMAGE_MAGIC, 1) + b'\x00')
        assert 'expected label magic' in info.value.message
        assert info.value.details['offset'] == 0

    def test_images_with_label_magic(self):
        with pytest.raises(IdxFormatError) as info:
            parse_idx_images(_label_file([1, 2]))
        assert 'found label magic' in info.value.message

    def test_truncated_payload_names_the_offset(self):
        data = _image_file([0] * 7, 2, 2, 2)
        with pytest.raises(IdxFormatError) as info:
            parse_idx_images(data)
        assert info.value.details['offset'] == len(data)

    def test_dimension_overflow(self):
        with pytest.raises(IdxFormatError) as info:
            parse_idx_images(struct.pack('>IIII', IMAGE_MAGIC, 2048, 2048, 2048))
        assert info.value.details['offset'] == 4

    def test_load_pair_from_gzip(self, tmp_path):
        images_path = tmp_path / 'train-images-idx3-ubyte.gz'
        with gzip.open(images_path, 'wb') as handle:
            handle.write(_image_file([255] * 8, 2, 2, 2))
        (tmp_path / 'train-labels-idx1-ubyte').write_bytes(_label_file([7, 2]))

        images, labels = load_mnist(tmp_path, 'train')
        np.testing.assert_array_equal(labels, [7, 2])
        assert images.min() == 1.0

    def test_count_mismatch(self, tmp_path):
        (tmp_path / 'i').write_bytes(_image_file([0] * 8, 2, 2, 2))
        (tmp_path / 'l').write_bytes(_label_file([1]))
        with pytest.raises(IdxFormatError):
            load_idx(tmp_path / 'i', tmp_path / 'l')

    def test_missing_files(self, tmp_path):
        assert load_mnist(tmp_path, 'test') is None
        with pytest.raises(StorageError):
            load_idx(tmp_path / 'nope', tmp_path / 'nope')


class TestColoredMnist:

    def test_palette(self):
        assert PALETTE.shape == (10, 3)
        assert default_palette(11).shape == (11, 3)
        with pytest.raises(ConfigurationError):
            default_palette(12)

    def test_every_color_lights_every_channel(self):
        palette = default_palette(11)
        assert palette.min() >= CHANNEL_FLOOR - 1e-12
        chroma = palette / palette.sum(axis=1, keepdims=True)
        gaps = np.linalg.norm(chroma[:, None] - chroma[None], axis=2) + np.eye(len(palette))
        assert gaps.min() > 0.05

    def test_strokes_show_in_all_channels(self):
        dataset = make_colored_mnist(_glyph_digits(), DATASET_TOPOLOGIES['cmnist'](), ratio=0.1, seed=1)
        planes = dataset.x_train.reshape(-1, 3, 28, 28) > 0
        assert (planes[:, 0] == planes[:, 1]).all()
        assert (planes[:, 0] == planes[:, 2]).all()

    def test_color_is_read_from_channel_totals(self):
        dataset = make_colored_mnist(_glyph_digits(), DATASET_TOPOLOGIES['cmnist'](), ratio=0.1, seed=1)
        totals = dataset.x_train.reshape(-1, 3, 28 * 28).sum(axis=2).astype(np.float64)
        chroma = totals / totals.sum(axis=1, keepdims=True)
        reference = PALETTE / PALETTE.sum(axis=1, keepdims=True)
        nearest = np.argmin(np.linalg.norm(chroma[:, None] - reference[None], axis=2), axis=1)
        np.testing.assert_array_equal(nearest, dataset.a_train_hidden)

    def test_colorize_tints_the_foreground(self):
        gray = make_glyph_digits(4, 1, seed=2)[0]
        colors = PALETTE[[0, 3, 5, 9]]
        x = colorize(gray, colors).reshape(4, 3, 28, 28)
        expected = gray[:, None, :, :] * colors.astype(np.float32)[:, :, None, None]
        np.testing.assert_allclose(x, expected, rtol=1e-6)
        assert (x[np.broadcast_to(gray[:, None] == 0, x.shape)] == 0).all()

    def test_threaded_colorize_is_identical(self, rng):
        gray = rng.random((5000, 28, 28), dtype=np.float32)
        colors = PALETTE[rng.integers(10, size=5000)]
        np.testing.assert_array_equal(colorize(gray, colors, threads=4), colorize(gray, colors, threads=1))

    def test_one_to_one_construction(self):
        dataset = make_colored_mnist(_glyph_digits(), DATASET_TOPOLOGIES['cmnist'](), ratio=0.1, seed=1)
        assert dataset.d == 2352
        assert dataset.train_minority_fraction() == pytest.approx(0.1, abs=1.0 / 30)
        counts = set(dataset.test_group_counts().values())
        assert len(counts) == 1 and counts.pop() > 0
        assert dataset.synthetic

    def test_many_to_one_shares_color_zero(self):
        dataset = make_colored_mnist(_glyph_digits(), DATASET_TOPOLOGIES['cmnist-m2o'](), ratio=0.1)
        assert dataset.n_attrs == 9
        aligned = dataset.topology.is_aligned(dataset.y_train, dataset.a_train_hidden)
        for digit in (0, 1):
            assert set(dataset.a_train_hidden[(dataset.y_train == digit) & aligned]) == {0}

    def test_one_to_many_splits_evenly(self):
        dataset = make_colored_mnist(_glyph_digits(), DATASET_TOPOLOGIES['cmnist-o2m'](), ratio=0.1)
        assert dataset.n_attrs == 11
        zeros = dataset.a_train_hidden[dataset.y_train == 0]
        assert abs(int(np.sum(zeros == 0)) - int(np.sum(zeros == 1))) <= 1
        assert len(set(dataset.test_group_counts().values())) == 1

    def test_palette_size_must_match(self):
        with pytest.raises(ConfigurationError):
            make_colored_mnist(_glyph_digits(), CorrelationTopology.one_to_one(10), 0.1, palette=PALETTE[:5])

    def test_label_count_must_match(self):
        with pytest.raises(TopologyError):
            make_colored_mnist(_glyph_digits(), CorrelationTopology.one_to_one(9), 0.1, palette=PALETTE[:9])

    def test_half_ratio_is_group_balanced(self, rng):
        labels = np.resize(np.arange(2), 40)
        attrs = assign_train_attributes(labels, CorrelationTopology.one_to_one(2), 0.5, rng)
        for y in (0, 1):
            assert int(np.sum((labels == y) & (attrs == y))) == 10

    def test_minority_counts_at_one_percent(self, rng):
        labels = np.resize(np.arange(10), 50000)
        topology = CorrelationTopology.one_to_one(10)
        attrs = assign_train_attributes(labels, topology, 0.01, rng)
        assert int(np.sum(~topology.is_aligned(labels, attrs))) == 500

    def test_tiny_ratio_keeps_one_minority_sample(self, rng, caplog):
        labels = np.resize(np.arange(2), 20)
        topology = CorrelationTopology.one_to_one(2)
        attrs = assign_train_attributes(labels, topology, 0.001, rng)
        assert int(np.sum(~topology.is_aligned(labels, attrs))) == 2
        assert 'no minority samples' in caplog.text

    @pytest.mark.parametrize('ratio', [0.0, 1.0, -0.2])
    def test_ratio_out_of_range(self, rng, ratio):
        with pytest.raises(ValidationError):
            assign_train_attributes(np.zeros(4, dtype=np.int64), CorrelationTopology.one_to_one(2), ratio, rng)

    def test_unknown_variant(self):
        with pytest.raises(ValidationError):
            build_colored_mnist('cmnist-x', 0.01)

    def test_glyph_fallback(self):
        digits = load_digits(None, seed=0, n_train=50, n_test=20)
        assert digits.synthetic
        assert digits.train_images.shape == (50, 28, 28)
        np.testing.assert_array_equal(np.bincount(digits.test_labels), [2] * 10)

    def test_slant_shifts_rows_about_the_center(self):
        canvas = np.zeros((28, 28), dtype=np.float32)
        canvas[:, 14] = 1.0
        slanted = slant(canvas, 0.3)
        assert slanted[0, 18] == 1.0
        assert slanted[13, 14] == 1.0
        assert slanted[27, 10] == 1.0
        assert slanted.sum() == 28.0


class TestGaussianToy:

    def test_shapes_and_balance(self):
        dataset = make_gaussian_toy(ratio=0.05, seed=0, n_train=1000, test_per_group=10)
        assert dataset.d == 4
        assert dataset.train_minority_fraction() == pytest.approx(0.05)
        assert set(dataset.test_group_counts().values()) == {10}
        assert dataset.extra['spurious_separation'] == 9.0

    def test_seeded(self):
        a = make_gaussian_toy(seed=4, n_train=100, test_per_group=5)
        b = make_gaussian_toy(seed=4, n_train=100, test_per_group=5)
        assert encode_dataset(a) == encode_dataset(b)

    def test_spurious_block_is_easier(self):
        dataset = make_gaussian_toy(ratio=0.5, seed=1, n_train=4000, test_per_group=10)
        x, y, a = dataset.x_train, dataset.y_train, dataset.a_train_hidden
        core_gap = x[y == 1, 0].mean() - x[y == 0, 0].mean()
        spur_gap = x[a == 1, 2].mean() - x[a == 0, 2].mean()
        assert core_gap == pytest.approx(3.0, abs=0.2)
        assert spur_gap == pytest.approx(9.0, abs=0.2)

    def test_zero_core_separation_keeps_the_spurious_block(self):
        dataset = make_gaussian_toy(ratio=0.5, separation=0.0, seed=3, n_train=4000, test_per_group=10)
        x, y, a = dataset.x_train, dataset.y_train, dataset.a_train_hidden
        assert dataset.extra['spurious_separation'] == SPURIOUS_SEPARATION
        assert x[y == 1, 0].mean() - x[y == 0, 0].mean() == pytest.approx(0.0, abs=0.2)
        assert x[a == 1, 2].mean() - x[a == 0, 2].mean() == pytest.approx(SPURIOUS_SEPARATION, abs=0.2)
        with pytest.raises(ValidationError):
            make_gaussian_toy(spurious_separation=0.0)

    def test_closed_form_bayes_gba(self):
        assert gaussian_bayes_gba(0.0) == pytest.approx(0.5)
        dataset = make_gaussian_toy(ratio=0.5, seed=2, n_train=100, test_per_group=5000)
        predictions = (dataset.x_test[:, 0] > 0).astype(np.int64)
        accuracy = np.mean(predictions == dataset.y_test)
        assert accuracy == pytest.approx(gaussian_bayes_gba(3.0), abs=0.01)

    def test_parameter_checks(self):
        with pytest.raises(ValidationError):
            make_gaussian_toy(n_labels=2, n_attrs=3)
        with pytest.raises(ValidationError):
            make_gaussian_toy(separation=-1.0)
        with pytest.raises(ValidationError):
            class_means(3, 2, 1.0)

    def test_multiclass_means_are_equidistant(self):
        means = class_means(3, 3, 2.0)
        distances = [np.linalg.norm(means[i] - means[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
        np.testing.assert_allclose(distances, 2.0)


class TestContainer:

    def test_round_trip(self):
        dataset = _small_dataset()
        restored = decode_dataset(encode_dataset(dataset))
        np.testing.assert_array_equal(restored.x_train, dataset.x_train)
        np.testing.assert_array_equal(restored.y_train, dataset.y_train)
        np.testing.assert_array_equal(restored.a_train_hidden, dataset.a_train_hidden)
        np.testing.assert_array_equal(restored.x_test, dataset.x_test)
        np.testing.assert_array_equal(restored.a_test, dataset.a_test)
        assert restored.minority_ratio == pytest.approx(0.25)
        assert restored.topology == dataset.topology

    def test_single_record_length(self):
        dataset = _small_dataset(n_train=1, n_test=0, d=6)
        assert len(encode_dataset(dataset)) == 5 + 24 + 6 * 4 + 3

    def test_version_mismatch(self):
        data = b'LCDS2' + encode_dataset(_small_dataset())[5:]
        with pytest.raises(DatasetFormatError) as info:
            decode_dataset(data)
        assert 'version' in info.value.message

    def test_truncation_and_trailing_bytes(self):
        data = encode_dataset(_small_dataset())
        with pytest.raises(DatasetFormatError) as info:
            decode_dataset(data[:-1])
        assert info.value.details['offset'] == len(data) - 1
        with pytest.raises(DatasetFormatError):
            decode_dataset(data + b'\x00')

    def test_merged_topology_needs_the_card(self):
        dataset = _small_dataset(CorrelationTopology.many_to_one([0, 0, 1]))
        with pytest.raises(DatasetFormatError):
            decode_dataset(encode_dataset(dataset))
        restored = decode_dataset(encode_dataset(dataset), dataset.card())
        assert restored.topology == dataset.topology

    def test_save_writes_card_and_manifest(self, tmp_path):
        dataset = _small_dataset(CorrelationTopology.many_to_one([0, 0, 1]))
        path = tmp_path / 'small.lcds'
        card = save_dataset(dataset, path)

        assert path.read_bytes()[:5] == MAGIC
        stored = json.loads(card_path(path).read_text())
        assert stored['checksum'] == card['checksum']
        assert stored['topology']['kind'] == 'many_to_one'

        with open(manifest_path(path), newline='') as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 9
        assert rows[0]['split'] == 'train' and rows[-1]['split'] == 'test'
        assert int(rows[0]['group']) == int(rows[0]['y']) * 2 + int(rows[0]['a'])

        restored = load_dataset(path)
        assert restored.name == 'small'
        assert restored.seed == 7
        np.testing.assert_array_equal(restored.y_test, dataset.y_test)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(StorageError):
            load_dataset(tmp_path / 'absent.lcds')

    def test_mismatched_lengths(self):
        with pytest.raises(ShapeError):
            BiasedDataset(np.zeros((3, 2)), np.zeros(2), np.zeros(3), np.zeros((1, 2)), np.zeros(1),
                          np.zeros(1), CorrelationTopology.one_to_one(2), 0.1)
