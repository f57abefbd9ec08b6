#!/usr/bin/env python
"""Command-line entry point for the Cltci toolkit.

Subcommands are Django management commands:

    python manage.py synth     --config configs/desk.yaml
    python manage.py pretrain  --config configs/desk.yaml --variant cl-tci-moco
    python manage.py finetune  --config configs/desk.yaml --M 4,8 --init runs/pretrain-<hash>/checkpoint.ckpt
    python manage.py eval      --config configs/desk.yaml --checkpoint runs/pretrain-<hash>/checkpoint.ckpt --k 3
    python manage.py report    --variant cl-tci-moco

The run registry is migrated on first use.
"""

import os
import sys


def main():
    """Run administrative tasks."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'Cltci.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
