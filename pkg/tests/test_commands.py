"""
Test cases for the management commands.
"""
from io import StringIO
from pathlib import Path

import pandas as pd
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from Cltci.datasets.records import load_manifest, write_manifest
from Cltci.evaluation.models import DiceResult
from Cltci.runs.config import CONFIG_FILE, HASH_FILE
from Cltci.runs.management.commands.finetune import parse_budgets
from Cltci.runs.models import EpochMetric, Run

TINY_CONFIG = """
seed: 0
paths:
  data_dir: {data_dir}
synthetic:
  num_patients: 4
  images_per_patient: 3
  image_size: 32
preprocess:
  target_size: 32
pretrain:
  epochs: 1
  steps_per_epoch: 2
  batch:
    patients_per_batch: 2
  moco:
    momentum: 0.99
    queue_capacity: 16
  encoder:
    variant: tiny-cnn
  projection:
    output_dim: 8
finetune:
  epochs: 1
  batch_size: 2
  budgets: [2]
  folds: 2
  encoder:
    variant: tiny-cnn
eval:
  k: 2
  permutations: 5
"""


def run_command(name, *args):
    out = StringIO()
    call_command(name, *args, stdout=out)
    return out.getvalue().strip()


@pytest.fixture(autouse=True)
def registry(mocker):
    """The test database is already migrated."""
    mocker.patch('Cltci.runs.management.commands._base.ensure_registry')
    mocker.patch('Cltci.runs.management.commands.report.ensure_registry')


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / 'tiny.yaml'
    path.write_text(TINY_CONFIG.format(data_dir=(tmp_path / 'data').as_posix()))
    return str(path)


@pytest.fixture
def synthesized(tiny_config):
    run_command('synth', '--config', tiny_config)
    return tiny_config


@pytest.fixture
def checkpoint(synthesized):
    return run_command('pretrain', '--config', synthesized)


class TestParseBudgets:
    """Test cases for the --M flag."""

    def test_numbers_and_all(self):
        """Test that 'all' stands for the full fold."""
        assert parse_budgets('4, 8,all') == [4, 8, None]

    def test_invalid(self):
        """Test that non-numeric and non-positive budgets are rejected."""
        import argparse

        with pytest.raises(argparse.ArgumentTypeError):
            parse_budgets('four')
        with pytest.raises(argparse.ArgumentTypeError):
            parse_budgets('0')


@pytest.mark.django_db
class TestSynthCommand:
    """Test cases for dataset generation."""

    def test_writes_manifest(self, tiny_config, tmp_path):
        """Test that the manifest path is printed and the run recorded."""
        output = run_command('synth', '--config', tiny_config)

        manifest = Path(output)
        assert manifest == tmp_path / 'data' / 'manifest.csv'
        assert len(pd.read_csv(manifest)) == 12
        assert (manifest.parent / CONFIG_FILE).is_file()
        assert (manifest.parent / HASH_FILE).is_file()
        run = Run.objects.get()
        assert run.kind == 'synth'
        assert run.status == 'completed'

    def test_flags_override_config(self, tiny_config, tmp_path):
        """Test that flags take precedence over the file."""
        output = run_command('synth', '--config', tiny_config, '--num-patients', '2', '--out', str(tmp_path / 'two'))

        assert len(pd.read_csv(output)) == 6
        assert Run.objects.get().config['synthetic']['num_patients'] == 2

    def test_unknown_config_key(self, tmp_path):
        """Test that a misspelled key is a command error."""
        path = tmp_path / 'bad.yaml'
        path.write_text('synthetic:\n  num_patient: 4\n')

        with pytest.raises(CommandError, match='num_patient'):
            run_command('synth', '--config', str(path))
        assert not Run.objects.exists()


@pytest.mark.django_db
class TestPretrainCommand:
    """Test cases for the pretraining command."""

    def test_writes_checkpoint(self, checkpoint, output_root):
        """Test that the checkpoint lands in a hash-named directory."""
        path = Path(checkpoint)

        assert path.is_file()
        assert path.parent.parent == output_root
        assert path.parent.name.startswith('pretrain-')
        assert (path.parent / 'metrics.csv').is_file()
        run = Run.objects.get(kind='pretrain')
        assert run.variant == 'cl-tci-simclr'
        assert path.parent.name == f'pretrain-{run.config_hash[:12]}'
        assert EpochMetric.objects.filter(run=run).count() == 1

    def test_variant_flag(self, synthesized):
        """Test that --variant selects the loop and changes the hash."""
        first = run_command('pretrain', '--config', synthesized)
        second = run_command('pretrain', '--config', synthesized, '--variant', 'moco-baseline')

        assert Path(first).parent != Path(second).parent
        assert Run.objects.filter(variant='moco-baseline', status='completed').exists()

    def test_invalid_variant(self, synthesized):
        """Test that an unknown variant is a usage error."""
        with pytest.raises(CommandError):
            run_command('pretrain', '--config', synthesized, '--variant', 'byol')

    def test_missing_manifest(self, tiny_config, tmp_path):
        """Test that a missing manifest fails the run."""
        with pytest.raises(CommandError, match='Manifest not found'):
            run_command('pretrain', '--config', tiny_config, '--manifest', str(tmp_path / 'absent.csv'))
        assert Run.objects.get().status == 'failed'

    def test_runtime_error_fails_the_run(self, synthesized, mocker):
        """Test that a torch runtime error is a command error and closes the run."""
        mocker.patch(
            'Cltci.runs.management.commands.pretrain.pretrain',
            side_effect=RuntimeError('mat1 and mat2 shapes cannot be multiplied'),
        )

        with pytest.raises(CommandError, match='mat1 and mat2'):
            run_command('pretrain', '--config', synthesized)
        assert Run.objects.get(kind='pretrain').status == 'failed'

    def test_unexpected_error_still_closes_the_run(self, synthesized, mocker):
        """Test that any other exception propagates after marking the run failed."""
        mocker.patch('Cltci.runs.management.commands.pretrain.pretrain', side_effect=TypeError('bad batch'))

        with pytest.raises(TypeError):
            run_command('pretrain', '--config', synthesized)
        run = Run.objects.get(kind='pretrain')
        assert run.status == 'failed'
        assert run.error == 'bad batch'

    def test_resume_finished_run(self, synthesized, checkpoint):
        """Test that resuming a finished run keeps its checkpoint epoch."""
        resumed = run_command('pretrain', '--config', synthesized, '--resume', checkpoint)

        assert resumed == checkpoint
        assert Run.objects.filter(kind='pretrain', status='completed').count() == 2


@pytest.mark.django_db
class TestEvalCommand:
    """Test cases for the embedding evaluation command."""

    def test_prints_purity(self, synthesized, checkpoint):
        """Test that purity is printed as a number in [0, 1]."""
        output = run_command('eval', '--config', synthesized, '--checkpoint', checkpoint)

        assert 0.0 <= float(output) <= 1.0
        run = Run.objects.get(kind='eval')
        assert run.variant == 'cl-tci-simclr'
        assert (Path(run.out_dir) / 'embeddings.csv').is_file()
        assert (Path(run.out_dir) / 'embeddings_2d.png').is_file()

    def test_missing_checkpoint(self, synthesized, tmp_path):
        """Test that a missing checkpoint file is a command error."""
        with pytest.raises(CommandError, match='Checkpoint not found'):
            run_command('eval', '--config', synthesized, '--checkpoint', str(tmp_path / 'absent.ckpt'))

    def test_no_checkpoint(self, synthesized):
        """Test that eval needs a checkpoint."""
        with pytest.raises(CommandError, match='No checkpoint'):
            run_command('eval', '--config', synthesized)


@pytest.mark.django_db
class TestFinetuneAndReportCommands:
    """Test cases for fine-tuning and the aggregated report."""

    def test_random_init(self, synthesized):
        """Test one Dice row per fold and a results table."""
        output = run_command('finetune', '--config', synthesized, '--init', 'none')

        results = pd.read_csv(output)
        assert len(results) == 2
        assert set(results['variant']) == {'random'}
        assert DiceResult.objects.count() == 2
        assert Run.objects.get(kind='finetune').variant == 'random'

    def test_pretrained_init(self, synthesized, checkpoint):
        """Test that results carry the pretraining variant."""
        run_command('finetune', '--config', synthesized, '--init', checkpoint, '--M', '2,4')

        assert set(DiceResult.objects.values_list('variant', flat=True)) == {'cl-tci-simclr'}
        assert sorted(DiceResult.objects.values_list('m', flat=True)) == [2, 2, 4, 4]

    def test_predictions(self, synthesized):
        """Test that the last fold's validation images get predicted mask PNGs."""
        output = run_command('finetune', '--config', synthesized, '--init', 'none', '--predictions')

        predictions = sorted((Path(output).parent / 'predictions').glob('*.png'))
        assert len(predictions) == 6

    def test_separate_finetune_manifest(self, synthesized, tmp_path):
        """Test fine-tuning on a one-image-per-patient manifest."""
        manifest = load_manifest(tmp_path / 'data' / 'manifest.csv')
        first_images = [records[0].image_id for records in manifest.by_patient.values()]
        single = write_manifest(manifest.subset(first_images), tmp_path / 'data' / 'single.csv')

        output = run_command('finetune', '--config', synthesized, '--init', 'none', '--manifest', str(single))

        assert len(pd.read_csv(output)) == 2
        assert Run.objects.get(kind='finetune').config['paths']['finetune_manifest'] == str(single)

    def test_budget_too_large(self, synthesized):
        """Test that a budget larger than a training fold fails the run."""
        with pytest.raises(CommandError, match='exceeds'):
            run_command('finetune', '--config', synthesized, '--init', 'none', '--M', '50')

    def test_report(self, synthesized, tmp_path):
        """Test that stored results are aggregated into a summary."""
        run_command('finetune', '--config', synthesized, '--init', 'none')

        output = run_command('report', '--out', str(tmp_path / 'report'))

        summary = pd.read_csv(output)
        assert list(summary['variant']) == ['random']
        assert summary.loc[0, 'n'] == 2
        assert (tmp_path / 'report' / 'dice_vs_M.png').is_file()

    def test_report_without_results(self):
        """Test that an empty selection is a command error."""
        with pytest.raises(CommandError, match='No Dice results'):
            run_command('report', '--variant', 'cl-tci-moco')
