import argparse

from Cltci.datasets.bank import ImageBank
from Cltci.datasets.records import load_manifest
from Cltci.evaluation.models import DiceResult
from Cltci.evaluation.reports import emit_report, export_predictions
from Cltci.networks.checkpoints import load_checkpoint
from Cltci.training.finetune import RANDOM_INIT, finetune, patient_folds

from ._base import ToolkitCommand

NO_INIT = 'none'


def parse_budgets(value):
    """`4,8,all` -> [4, 8, None]."""
    budgets = []
    for item in value.split(','):
        item = item.strip().lower()
        if item in ('all', 'full'):
            budgets.append(None)
            continue
        try:
            budget = int(item)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid budget '{item}'")
        if budget < 1:
            raise argparse.ArgumentTypeError(f"budget must be positive, got {budget}")
        budgets.append(budget)
    return budgets


class Command(ToolkitCommand):
    help = "Fine-tune the segmentation network under annotation budgets"
    kind = 'finetune'

    def add_run_arguments(self, parser):
        parser.add_argument('--M', dest='budgets', type=parse_budgets, help="Comma-separated annotation budgets")
        parser.add_argument('--folds', type=int, help="Number of patient-grouped folds")
        parser.add_argument('--epochs', type=int, help="Fine-tuning epochs per fold")
        parser.add_argument('--manifest', help="Manifest of the annotated images")
        parser.add_argument('--init', help="Pretrained checkpoint, or 'none' for random initialization")
        parser.add_argument(
            '--predictions', action='store_true',
            help="Write the last fold's predicted masks for its validation patients",
        )

    def overrides(self, options):
        init = options.get('init')
        return {
            'finetune.budgets': options.get('budgets'),
            'finetune.folds': options.get('folds'),
            'finetune.epochs': options.get('epochs'),
            'paths.finetune_manifest': options.get('manifest'),
            'paths.checkpoint': init if init and init.lower() != NO_INIT else None,
        }

    def run(self, cfg, out_dir, run, options, num_workers):
        init = options.get('init')
        path = None if init and init.lower() == NO_INIT else cfg.paths.checkpoint
        checkpoint = load_checkpoint(path) if path else None
        variant = checkpoint.metadata.get('pretrain_variant', 'pretrained') if checkpoint else RANDOM_INIT
        run.variant = variant
        run.save(update_fields=['variant'])

        manifest = load_manifest(cfg.paths.finetune_manifest_path).annotated()
        if not len(manifest):
            raise ValueError(f"No annotated images in {cfg.paths.finetune_manifest_path}")

        def record_report(report):
            DiceResult.from_report(run, report).save()

        bank = ImageBank(manifest, cfg.preprocess, num_workers=num_workers)
        net, reports = finetune(
            manifest,
            checkpoint,
            cfg.finetune,
            preprocess=cfg.preprocess,
            bank=bank,
            variant=variant,
            on_report=record_report,
            progress=options.get('progress', False),
        )
        if options.get('predictions'):
            _, validation = patient_folds(manifest, cfg.finetune.folds)[-1]
            export_predictions(net, bank, (record.image_id for record in validation), out_dir / 'predictions')
        return emit_report(reports, out_dir)['results']
