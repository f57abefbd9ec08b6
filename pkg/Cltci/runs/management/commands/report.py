from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from Cltci.evaluation.filters import DiceResultFilter
from Cltci.evaluation.models import DiceResult
from Cltci.evaluation.reports import emit_report

from ._base import ensure_registry


class Command(BaseCommand):
    help = "Aggregate stored Dice results into result tables and a Dice-vs-M figure"

    def add_arguments(self, parser):
        parser.add_argument('--variant', help="Pretraining variant")
        parser.add_argument('--m-min', type=int, help="Smallest budget")
        parser.add_argument('--m-max', type=int, help="Largest budget")
        parser.add_argument('--seed', type=int)
        parser.add_argument('--config-hash', help="Config hash or prefix of the fine-tuning runs")
        parser.add_argument('--run', type=int, help="Fine-tuning run ID")
        parser.add_argument('--out', help="Output directory")

    def handle(self, *args, **options):
        ensure_registry()
        data = {
            key: options[key] for key in ('variant', 'm_min', 'm_max', 'seed', 'config_hash', 'run')
            if options.get(key) is not None
        }
        filterset = DiceResultFilter(data, queryset=DiceResult.objects.select_related('run'))
        if not filterset.is_valid():
            raise CommandError(f"Invalid filters: {dict(filterset.errors)}")
        reports = [result.to_report() for result in filterset.qs]
        if not reports:
            raise CommandError("No Dice results match the given filters")

        out_dir = Path(options['out']) if options.get('out') else Path(settings.CLTCI_OUTPUT_ROOT) / 'report'
        written = emit_report(reports, out_dir)
        self.stdout.write(str(written['summary']))
