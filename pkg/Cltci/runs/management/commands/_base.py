"""
Shared plumbing of the toolkit commands.

Every command reads a run configuration (`--config` plus flags), writes
`config.yaml` and `config_hash.txt` into its output directory and records
itself as a Run row. Invalid input surfaces as a CommandError (exit 1);
argparse usage errors keep their exit status 2.
"""
import logging
import zipfile
from pathlib import Path

import torch
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from Cltci.runs.config import config_hash, load_run_config, write_run_files
from Cltci.runs.models import Run

logger = logging.getLogger('Cltci')

FAILURES = (serializers.ValidationError, ValueError, OSError, KeyError, RuntimeError, zipfile.BadZipFile)


def ensure_registry():
    """Apply pending migrations so the run registry exists on first use."""
    call_command('migrate', verbosity=0, interactive=False)


def configure_determinism(deterministic: bool) -> int:
    """Number of data-loading workers to use."""
    if not deterministic:
        return settings.CLTCI_NUM_WORKERS
    torch.use_deterministic_algorithms(True)
    torch.set_num_threads(1)
    return 0


def resolve_config_path(value):
    """A file path, or the name of a preset in the configs directory."""
    if value is None:
        return None
    path = Path(value)
    if path.exists():
        return path
    preset = Path(settings.CLTCI_CONFIG_DIR) / f'{value}.yaml'
    return preset if preset.exists() else path


def describe(exc) -> str:
    if isinstance(exc, serializers.ValidationError):
        return f"Invalid input: {exc.detail}"
    return str(exc)


class ToolkitCommand(BaseCommand):
    """
    Base class of the toolkit commands.

    Subclasses set `kind`, declare their own flags in `add_run_arguments`,
    map them onto configuration keys in `overrides` and do the work in
    `run`, whose return value is printed on stdout.
    """
    kind = None

    def add_arguments(self, parser):
        parser.add_argument('--config', help="YAML configuration file or preset name (desk, full)")
        parser.add_argument('--seed', type=int, help="Run seed")
        parser.add_argument('--out', help="Output directory")
        parser.add_argument(
            '--deterministic',
            action='store_true',
            help="Single-threaded deterministic kernels and in-process data loading",
        )
        parser.add_argument('--progress', action='store_true', help="Show progress bars")
        self.add_run_arguments(parser)

    def add_run_arguments(self, parser):
        pass

    def overrides(self, options) -> dict:
        return {}

    def output_dir(self, cfg, options, digest) -> Path:
        if options.get('out'):
            return Path(options['out'])
        if cfg.paths.out_dir:
            return Path(cfg.paths.out_dir)
        return Path(settings.CLTCI_OUTPUT_ROOT) / f'{self.kind}-{digest[:12]}'

    def variant_of(self, cfg, options) -> str:
        return ''

    def run(self, cfg, out_dir: Path, run: Run, options, num_workers: int):
        raise NotImplementedError

    def handle(self, *args, **options):
        overrides = {'seed': options.get('seed')}
        overrides.update(self.overrides(options))
        try:
            cfg, resolved = load_run_config(resolve_config_path(options.get('config')), overrides)
        except serializers.ValidationError as exc:
            raise CommandError(describe(exc))

        digest = config_hash(resolved)
        out_dir = self.output_dir(cfg, options, digest)
        write_run_files(out_dir, resolved, digest)
        num_workers = configure_determinism(options.get('deterministic', False))

        ensure_registry()
        run = Run.objects.create(
            kind=self.kind,
            variant=self.variant_of(cfg, options),
            config_hash=digest,
            config=resolved,
            seed=cfg.seed,
            out_dir=str(out_dir),
        )
        logger.info("%s run %d (config %s) writing to %s", self.kind, run.id, digest[:12], out_dir)

        try:
            result = self.run(cfg, out_dir, run, options, num_workers)
        except FAILURES as exc:
            run.mark_failed(describe(exc))
            raise CommandError(describe(exc))
        except Exception as exc:
            logger.exception("%s run %d failed unexpectedly", self.kind, run.id)
            run.mark_failed(describe(exc))
            raise
        run.mark_completed()
        if result is not None:
            self.stdout.write(str(result))
