from Cltci.datasets.records import load_manifest
from Cltci.networks.checkpoints import load_checkpoint, save_checkpoint
from Cltci.runs.models import EpochMetric
from Cltci.training.config import PretrainVariant
from Cltci.training.pretrain import CHECKPOINT_NAME, pretrain

from ._base import ToolkitCommand


class Command(ToolkitCommand):
    help = "Contrastive pretraining of the encoder"
    kind = 'pretrain'

    def add_run_arguments(self, parser):
        parser.add_argument(
            '--variant',
            choices=[variant.value for variant in PretrainVariant],
            help="Pretraining variant",
        )
        parser.add_argument('--epochs', type=int, help="Total number of epochs")
        parser.add_argument('--manifest', help="Manifest of the pretraining images")
        parser.add_argument('--resume', help="Checkpoint to continue from")

    def overrides(self, options):
        return {
            'pretrain.variant': options.get('variant'),
            'pretrain.epochs': options.get('epochs'),
            'paths.manifest': options.get('manifest'),
        }

    def variant_of(self, cfg, options):
        return cfg.pretrain.variant.value

    def run(self, cfg, out_dir, run, options, num_workers):
        manifest = load_manifest(cfg.paths.pretrain_manifest_path)
        resume = load_checkpoint(options['resume']) if options.get('resume') else None

        def record_epoch(row):
            EpochMetric.objects.create(run=run, **row)

        checkpoint = pretrain(
            manifest,
            cfg.pretrain,
            out_dir=out_dir,
            resume=resume,
            preprocess=cfg.preprocess,
            num_workers=num_workers,
            config_hash=run.config_hash,
            on_epoch=record_epoch,
            progress=options.get('progress', False),
        )
        return save_checkpoint(checkpoint, out_dir / CHECKPOINT_NAME)
