"""
Test cases for manifests, preprocessing, batch sampling and the synthetic generator.
"""
import hashlib
from collections import Counter

import numpy as np
import pytest
from rest_framework import serializers

from Cltci.datasets.bank import ImageBank
from Cltci.datasets.preprocessing import (
    Normalization,
    PreprocessConfig,
    pad_to_square,
    preprocess,
    preprocess_mask,
    square_padding,
    write_png,
)
from Cltci.datasets.records import Manifest, load_manifest, write_manifest
from Cltci.datasets.sampling import SamplerConfig, sample_batch
from Cltci.datasets.synthetic import SyntheticConfig, generate_synthetic, separability
from tests.factories import ImageRecordFactory


def write_manifest_file(tmp_path, rows, separator=','):
    """Write images for `rows` (image_id, patient_id) and a manifest listing them."""
    lines = [separator.join(['image_id', 'patient_id', 'image_path'])]
    for image_id, patient_id in rows:
        write_png(np.zeros((8, 8), dtype=np.uint8), tmp_path / 'images' / f'{image_id}.png')
        lines.append(separator.join([image_id, patient_id, f'images/{image_id}.png']))
    path = tmp_path / 'manifest.csv'
    path.write_text('\n'.join(lines) + '\n')
    return path


class TestManifest:
    """Test cases for loading and validating manifests."""

    def test_counts_patients(self, tmp_path):
        """Test that 3 records of 2 patients give num_patients == 2."""
        path = write_manifest_file(tmp_path, [('a', 'P1'), ('b', 'P1'), ('c', 'P2')])

        manifest = load_manifest(path)

        assert len(manifest) == 3
        assert manifest.num_patients == 2
        assert [r.image_id for r in manifest.by_patient['P1']] == ['a', 'b']

    def test_tab_separated(self, tmp_path):
        """Test that the separator is taken from the header line."""
        path = write_manifest_file(tmp_path, [('a', 'P1'), ('b', 'P2')], separator='\t')

        assert load_manifest(path).patient_ids == ['P1', 'P2']

    def test_relative_paths_resolved_against_manifest(self, tmp_path):
        """Test that image paths are resolved against the manifest directory."""
        path = write_manifest_file(tmp_path, [('a', 'P1')])

        record = load_manifest(path).get('a')

        assert record.image_path == tmp_path / 'images' / 'a.png'
        assert record.mask_path is None

    def test_duplicate_image_id(self, tmp_path):
        """Test that a duplicate image_id is rejected and named."""
        path = write_manifest_file(tmp_path, [('a', 'P1'), ('a', 'P2')])

        with pytest.raises(serializers.ValidationError) as excinfo:
            load_manifest(path)
        assert "'a'" in str(excinfo.value.detail)

    def test_missing_files_listed(self, tmp_path):
        """Test that every missing image file is reported."""
        path = write_manifest_file(tmp_path, [('a', 'P1')])
        with open(path, 'a') as handle:
            handle.write('b,P1,images/b.png\nc,P2,images/c.png\n')

        with pytest.raises(serializers.ValidationError) as excinfo:
            load_manifest(path)
        missing = excinfo.value.detail['missing_files']
        assert len(missing) == 2
        assert any(str(item).endswith('b.png') for item in missing)

    def test_missing_column(self, tmp_path):
        """Test that a header without patient_id is rejected."""
        path = tmp_path / 'manifest.csv'
        path.write_text('image_id,image_path\na,images/a.png\n')

        with pytest.raises(serializers.ValidationError) as excinfo:
            load_manifest(path)
        assert 'patient_id' in excinfo.value.detail

    def test_manifest_rejects_duplicates_on_construction(self):
        """Test that a Manifest built in memory also refuses duplicate ids."""
        record = ImageRecordFactory(image_id='same')

        with pytest.raises(serializers.ValidationError):
            Manifest((record, record))

    def test_annotated_and_subset(self):
        """Test annotated() keeps masked records and subset() keeps the given order."""
        records = (
            ImageRecordFactory(image_id='a', mask_path='masks/a.png'),
            ImageRecordFactory(image_id='b'),
            ImageRecordFactory(image_id='c', mask_path='masks/c.png'),
        )
        manifest = Manifest(records)

        assert [r.image_id for r in manifest.annotated()] == ['a', 'c']
        assert [r.image_id for r in manifest.subset(['c', 'a'])] == ['c', 'a']

    def test_write_then_load(self, synthetic_dir):
        """Test that a written manifest loads back to the same records."""
        manifest = load_manifest(synthetic_dir / 'manifest.csv')

        copy = load_manifest(write_manifest(manifest, synthetic_dir / 'copy.csv'))

        assert copy.records == manifest.records


class TestPreprocessing:
    """Test cases for padding, resizing and normalization."""

    def test_even_deficit_split(self):
        """Test that a 100x60 image gets 20 columns of padding on each side."""
        assert square_padding(100, 60) == ((0, 0), (20, 20))

        padded = pad_to_square(np.ones((100, 60)), pad_value=0)

        assert padded.shape == (100, 100)
        assert padded[:, :20].sum() == 0
        assert padded[:, 80:].sum() == 0
        assert padded[:, 20:80].sum() == 100 * 60

    def test_odd_deficit_goes_to_trailing_edge(self):
        """Test that a 100x59 image gets 20 leading and 21 trailing columns."""
        assert square_padding(100, 59) == ((0, 0), (20, 21))

        padded = pad_to_square(np.ones((100, 59)))

        assert padded[:, :20].sum() == 0
        assert padded[:, 79:].sum() == 0
        assert padded[:, 20:79].all()

    def test_tall_image_padded_vertically(self):
        """Test that rows are padded when the image is taller than wide."""
        assert square_padding(59, 100) == ((20, 21), (0, 0))

    def test_square_image_only_resized(self):
        """Test that a square input is not padded and comes out at target size."""
        image = np.random.default_rng(0).random((100, 100))

        result = preprocess(image, PreprocessConfig(target_size=256))

        assert result.shape == (256, 256)
        assert result.dtype == np.float32
        assert abs(float(result.mean())) < 1e-4
        assert float(result.std()) == pytest.approx(1.0, abs=1e-3)

    def test_minmax_normalization(self):
        """Test that min-max normalization maps to [0, 1]."""
        image = np.arange(64, dtype=float).reshape(8, 8)

        result = preprocess(image, PreprocessConfig(target_size=8, normalization=Normalization.MINMAX))

        assert result.min() == 0.0
        assert result.max() == 1.0

    def test_downscale_is_plain_bilinear(self):
        """Test that 64 -> 16 samples between columns 4i+1 and 4i+2 without blurring in column 4i."""
        image = np.zeros((64, 64))
        image[:, ::4] = 1.0

        result = preprocess(image, PreprocessConfig(target_size=16, normalization=Normalization.MINMAX))

        assert result.shape == (16, 16)
        assert not result.any()

    def test_mask_resize_keeps_labels(self):
        """Test that nearest-neighbour mask resizing introduces no new labels."""
        mask = np.zeros((100, 59), dtype=np.uint8)
        mask[20:80, 5:25] = 1
        mask[20:80, 35:55] = 2

        result = preprocess_mask(mask, PreprocessConfig(target_size=64))

        assert result.shape == (64, 64)
        assert set(np.unique(result)) <= {0, 1, 2}
        assert {1, 2} <= set(np.unique(result))

    def test_empty_image(self):
        """Test that an empty image is rejected."""
        with pytest.raises(ValueError):
            preprocess(np.zeros((0, 10)), PreprocessConfig())


class TestSampling:
    """Test cases for the patient-grouped batch sampler."""

    def setup_method(self):
        records = [
            ImageRecordFactory(image_id=f'P{p}_{t}', patient_id=f'P{p}')
            for p in range(8) for t in range(4)
        ]
        self.manifest = Manifest(tuple(records))

    def test_p_by_k_batch(self):
        """Test that P=2, K=2 gives 4 records from 2 patients, 2 each."""
        batch = sample_batch(self.manifest, SamplerConfig(patients_per_batch=2, images_per_patient=2), 0)

        patients = [record.patient_id for record in batch]
        assert len(batch) == 4
        assert len(set(patients)) == 2
        assert patients[0] == patients[1] and patients[2] == patients[3]

    def test_one_image_per_patient(self):
        """Test that K=1 draws every record from a distinct patient."""
        batch = sample_batch(self.manifest, SamplerConfig(patients_per_batch=8, images_per_patient=1), 3)

        assert len({record.patient_id for record in batch}) == 8

    def test_same_seed_same_batch(self):
        """Test that two calls with the same rng state draw the same records."""
        cfg = SamplerConfig(patients_per_batch=4, images_per_patient=2)

        assert sample_batch(self.manifest, cfg, [7, 1]) == sample_batch(self.manifest, cfg, [7, 1])

    def test_random_manifests_and_shapes(self):
        """Test exactly K records of each of P distinct patients over random manifests and (P, K)."""
        rng = np.random.default_rng(11)

        for trial in range(100):
            sizes = rng.integers(1, 6, size=int(rng.integers(2, 10)))
            records = [
                ImageRecordFactory(image_id=f'T{trial}_P{p}_{t}', patient_id=f'P{p}')
                for p, size in enumerate(sizes) for t in range(size)
            ]
            manifest = Manifest(tuple(records))
            cfg = SamplerConfig(
                patients_per_batch=int(rng.integers(2, len(sizes) + 1)),
                images_per_patient=int(rng.integers(1, 5)),
            )

            batch = sample_batch(manifest, cfg, rng)

            counts = Counter(record.patient_id for record in batch)
            assert len(batch) == cfg.batch_images
            assert len(counts) == cfg.patients_per_batch
            assert set(counts.values()) == {cfg.images_per_patient}
            groups = manifest.by_patient
            assert all(record in groups[record.patient_id] for record in batch)

    def test_too_few_patients(self):
        """Test that asking for more patients than exist is an error."""
        with pytest.raises(ValueError):
            sample_batch(self.manifest, SamplerConfig(patients_per_batch=9), 0)

    def test_short_patient_sampled_with_replacement(self):
        """Test that a patient with fewer than K images still contributes K records."""
        manifest = Manifest((
            ImageRecordFactory(image_id='x', patient_id='A'),
            ImageRecordFactory(image_id='y', patient_id='B'),
            ImageRecordFactory(image_id='z', patient_id='B'),
        ))

        batch = sample_batch(manifest, SamplerConfig(patients_per_batch=2, images_per_patient=3), 0)

        assert [record.image_id for record in batch].count('x') in (0, 3)
        assert len(batch) == 6


class TestSyntheticGenerator:
    """Test cases for the synthetic longitudinal dataset."""

    def test_default_layout(self, tmp_path):
        """Test that 8 patients x 4 images write 32 images, 32 masks and a manifest."""
        manifest = generate_synthetic(SyntheticConfig(num_patients=8, images_per_patient=4, image_size=32), tmp_path)

        assert len(list((tmp_path / 'images').glob('*.png'))) == 32
        assert len(list((tmp_path / 'masks').glob('*.png'))) == 32
        loaded = load_manifest(tmp_path / 'manifest.csv')
        assert len(loaded) == 32
        assert loaded.num_patients == 8
        assert len(manifest) == 32

    def test_mask_labels(self, manifest):
        """Test that every generated mask uses only labels 0, 1 and 2."""
        from Cltci.datasets.preprocessing import read_mask

        for record in manifest:
            labels = set(np.unique(read_mask(record.mask_path)))
            assert labels <= {0, 1, 2}
            assert {1, 2} <= labels

    def test_left_lung_on_image_right(self, manifest):
        """Test that label 1 sits on the right half of the image."""
        from Cltci.datasets.preprocessing import read_mask

        mask = read_mask(manifest.records[0].mask_path)
        columns = np.nonzero(mask == 1)[1]
        assert columns.mean() > mask.shape[1] / 2

    def test_rerun_is_bitwise_identical(self, tmp_path):
        """Test that the same seed reproduces every file byte for byte."""
        cfg = SyntheticConfig(num_patients=2, images_per_patient=2, image_size=32)
        generate_synthetic(cfg, tmp_path / 'a')
        generate_synthetic(cfg, tmp_path / 'b')

        for path in sorted((tmp_path / 'a').rglob('*.png')):
            other = tmp_path / 'b' / path.relative_to(tmp_path / 'a')
            assert hashlib.sha256(path.read_bytes()).digest() == hashlib.sha256(other.read_bytes()).digest()

    def test_within_patient_closer_than_across(self, manifest):
        """Test that images of a patient are closer to each other than to other patients."""
        within, across = separability(manifest)

        assert within < across

    def test_annotated_fraction(self, tmp_path):
        """Test that only a fraction of the records carry a mask path."""
        cfg = SyntheticConfig(num_patients=4, images_per_patient=2, image_size=32, annotated_fraction=0.5)

        manifest = generate_synthetic(cfg, tmp_path)

        assert len(manifest.annotated()) == 4
        assert len(list((tmp_path / 'masks').glob('*.png'))) == 8

    def test_variable_images_per_patient(self, tmp_path):
        """Test that min_images_per_patient gives between min and max images each."""
        cfg = SyntheticConfig(num_patients=6, images_per_patient=4, image_size=32, min_images_per_patient=1)

        manifest = generate_synthetic(cfg, tmp_path)

        counts = [len(group) for group in manifest.by_patient.values()]
        assert all(1 <= count <= 4 for count in counts)

    def test_jitter_must_be_below_variation(self):
        """Test that within-patient jitter has to stay below across-patient variation."""
        with pytest.raises(ValueError):
            SyntheticConfig(within_patient_jitter=0.3, across_patient_variation=0.3)


class TestImageBank:
    """Test cases for the preprocessed image bank."""

    def test_preprocesses_every_record(self, manifest, preprocess_cfg):
        """Test that the bank holds one image and one mask per record."""
        bank = ImageBank(manifest, preprocess_cfg)

        assert len(bank) == len(manifest)
        image_ids = [record.image_id for record in manifest][:3]
        assert bank.stack_images(image_ids).shape == (3, 1, 32, 32)
        assert bank.stack_masks(image_ids).shape == (3, 32, 32)

    def test_missing_mask(self, tmp_path, preprocess_cfg):
        """Test that stacking masks of unannotated images is an error."""
        path = write_manifest_file(tmp_path, [('a', 'P1'), ('b', 'P2')])
        bank = ImageBank(load_manifest(path), preprocess_cfg)

        with pytest.raises(ValueError):
            bank.stack_masks(['a'])
