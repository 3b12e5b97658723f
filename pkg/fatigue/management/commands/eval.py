"""
Evaluate a checkpoint on one split of a dataset directory.

Usage:
    python manage.py eval --data data/ --model model.lfat [--split test] [--json]
"""

from dataclasses import replace

from fatigue.checkpoint import checkpoint_load
from fatigue.datadir import load_dataset_dir
from fatigue.metrics import evaluate_samples

from ._base import LiteFatCommand

METRIC_ORDER = ('accuracy', 'precision', 'recall', 'f1', 'auc')


class Command(LiteFatCommand):
    help = 'Report accuracy, precision, recall, F1 and AUC of a checkpoint.'

    def add_arguments(self, parser):
        parser.add_argument('--data', required=True, metavar='DIR', help='Dataset directory.')
        parser.add_argument('--model', required=True, metavar='CKPT', help='Checkpoint to evaluate.')
        parser.add_argument('--split', default='test', choices=('train', 'validation', 'test'),
                            help='Split to score (default: %(default)s).')
        parser.add_argument('--json', action='store_true', help='Print one JSON object instead of text.')

    def handle(self, *args, **options):
        params, run = checkpoint_load(options['model'])
        run = replace(run, data=replace(run.data, path=options['data']))
        data = load_dataset_dir(options['data'], run)
        result = evaluate_samples(getattr(data, options['split']), params, run.model)
        if options['json']:
            self.write_json({'split': options['split'], 'clips': result['clips'],
                             **{name: result[name] for name in METRIC_ORDER}})
            return
        self.stdout.write(f"split={options['split']} clips={result['clips']}")
        for name in METRIC_ORDER:
            value = result[name]
            self.stdout.write(f"{name:<10} {'-' if value is None else f'{value:.4f}'}")
