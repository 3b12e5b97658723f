#!/usr/bin/env python
"""
LiteFat command-line entry point.

Every subcommand is a Django management command of the ``fatigue`` app::

    python manage.py synth --out data/ --clips 30 --classes 3 --seed 7
    python manage.py train --data data/ --out model.lfat
    python manage.py eval --data data/ --model model.lfat --json
    python manage.py predict --model model.lfat --input frames.jsonl --out predictions.jsonl
    python manage.py bench --batch 4 --iters 20 --json
    python manage.py gradcheck --tol 1e-4
    python manage.py ablate --data data/ --seeds 1,2,3

Exit status: 0 success, 1 usage error, 2 data/format error, 3 numeric failure.
"""
import os
import sys


def main(argv=None):
    """Run one command and return its exit status."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'backend.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    try:
        execute_from_command_line(list(sys.argv if argv is None else argv))
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
