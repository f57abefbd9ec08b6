"""
Pytest configuration and shared fixtures for the toolkit tests.
"""
import os
import sys

import django
import pytest

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def pytest_configure():
    """Configure Django settings for pytest."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'Cltci.settings')
    django.setup()


TINY_SIZE = 32


@pytest.fixture(scope='session')
def synthetic_dir(tmp_path_factory):
    """Small synthetic dataset: 4 patients x 3 images at 32px."""
    from Cltci.datasets.synthetic import SyntheticConfig, generate_synthetic

    out_dir = tmp_path_factory.mktemp('synthetic')
    generate_synthetic(SyntheticConfig(num_patients=4, images_per_patient=3, image_size=TINY_SIZE), out_dir)
    return out_dir


@pytest.fixture
def manifest(synthetic_dir):
    from Cltci.datasets.records import load_manifest

    return load_manifest(synthetic_dir / 'manifest.csv')


@pytest.fixture
def preprocess_cfg():
    from Cltci.datasets.preprocessing import PreprocessConfig

    return PreprocessConfig(target_size=TINY_SIZE)


@pytest.fixture
def bank(manifest, preprocess_cfg):
    from Cltci.datasets.bank import ImageBank

    return ImageBank(manifest, preprocess_cfg)


@pytest.fixture
def tiny_spec():
    from Cltci.networks.specs import EncoderSpec

    return EncoderSpec(variant='tiny-cnn', input_size=TINY_SIZE)


@pytest.fixture
def pretrain_cfg(tiny_spec):
    """Factory for tiny pretraining configs."""
    from Cltci.datasets.sampling import SamplerConfig
    from Cltci.moco.queue import MoCoConfig
    from Cltci.networks.specs import ProjectionSpec
    from Cltci.training.config import PretrainConfig, PretrainVariant

    def build(variant='cl-tci-simclr', **overrides):
        moco_style = PretrainVariant(variant).is_moco
        values = dict(
            variant=variant,
            epochs=2,
            steps_per_epoch=2,
            batch=SamplerConfig(patients_per_batch=2, images_per_patient=1 if moco_style else 2),
            moco=MoCoConfig(momentum=0.99, queue_capacity=16),
            encoder=tiny_spec,
            projection=ProjectionSpec(output_dim=8),
        )
        values.update(overrides)
        return PretrainConfig(**values)

    return build


@pytest.fixture(autouse=True)
def output_root(settings, tmp_path):
    """Keep command outputs inside the test's temporary directory."""
    settings.CLTCI_OUTPUT_ROOT = tmp_path / 'runs'
    return settings.CLTCI_OUTPUT_ROOT
