"""
Ablation study on a dataset directory.

Trains the full model and each ablation (no gated TCN, no GCN, neither of
the two, no frame embedding) for every seed, scores the test split and
reports the median accuracy per variant.

Usage:
    python manage.py ablate --data data/ [--seeds 1,2,3] [--json]
"""

import argparse
import statistics
from dataclasses import replace

from fatigue.datadir import load_dataset_dir, run_config_for
from fatigue.metrics import evaluate_samples
from fatigue.network import count_parameters
from fatigue.training import train_loop

from ._base import LiteFatCommand

VARIANTS = (
    ('full', {}),
    ('no_tcn', {'use_tcn': False}),
    ('no_gcn', {'use_gcn': False}),
    ('no_stgl', {'use_tcn': False, 'use_gcn': False}),
    ('no_embedding', {'use_embedding': False}),
)
METRICS = ('accuracy', 'precision', 'recall', 'f1', 'auc')


def parse_seeds(text):
    try:
        seeds = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated integers, got {text!r}') from None
    if not seeds:
        raise argparse.ArgumentTypeError('no seeds given')
    return seeds


class Command(LiteFatCommand):
    help = 'Train and score the full model against its ablations.'

    def add_arguments(self, parser):
        parser.add_argument('--data', required=True, metavar='DIR', help='Dataset directory.')
        self.add_config_arguments(parser)
        parser.add_argument('--seeds', type=parse_seeds, default='1,2,3', help='Comma-separated training seeds (default: %(default)s).')
        parser.add_argument('--json', action='store_true', help='Print one JSON object instead of a table.')

    def handle(self, *args, **options):
        seeds = options['seeds']
        run = run_config_for(options['data'], options['config'], self.overrides(options))
        data = load_dataset_dir(options['data'], run)

        variants = []
        for name, switches in VARIANTS:
            model = replace(run.model, **switches)
            runs = []
            for seed in seeds:
                result = train_loop(data, model, run.train, seed)
                scores = evaluate_samples(data.test, result.params, model)
                runs.append({'seed': seed, 'epochs': len(result.history), **{m: scores[m] for m in METRICS}})
            variants.append({
                'name': name,
                'params': count_parameters(model),
                'median_accuracy': statistics.median(r['accuracy'] for r in runs),
                'runs': runs,
            })

        if options['json']:
            self.write_json({'seeds': seeds, 'variants': variants})
            return
        self.stdout.write(f"{'variant':<14}{'#para.':>10}{'median acc.':>13}  per-seed accuracy")
        for variant in variants:
            per_seed = ' '.join(f"{r['accuracy']:.4f}" for r in variant['runs'])
            self.stdout.write(f"{variant['name']:<14}{variant['params']:>10}{variant['median_accuracy']:>13.4f}  {per_seed}")
