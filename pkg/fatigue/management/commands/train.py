"""
Train a model on a dataset directory and write a checkpoint.

Usage:
    python manage.py train --data data/ --out model.lfat [--config run.conf] [--set model.R=16]
"""

from fatigue.checkpoint import checkpoint_save
from fatigue.datadir import load_dataset_dir, run_config_for
from fatigue.training import train_loop

from ._base import LiteFatCommand

FLAG_KEYS = {
    'epochs': 'train.max_epochs',
    'lr': 'train.learning_rate',
    'batch_size': 'train.batch_size',
    'seed': 'train.seed',
}


class Command(LiteFatCommand):
    help = 'Train the spatio-temporal graph classifier with Adam and early stopping.'

    def add_arguments(self, parser):
        parser.add_argument('--data', required=True, metavar='DIR', help='Dataset directory.')
        parser.add_argument('--out', required=True, metavar='CKPT', help='Checkpoint path to write.')
        self.add_config_arguments(parser)
        parser.add_argument('--epochs', type=int, help='Maximum epochs (default: 100).')
        parser.add_argument('--lr', type=float, help='Adam learning rate (default: 1e-4).')
        parser.add_argument('--batch-size', type=int, help='Clips per optimiser step (default: 1).')
        parser.add_argument('--seed', type=int, help='Initialisation and shuffle seed (default: 0).')

    def handle(self, *args, **options):
        run = run_config_for(options['data'], options['config'], self.overrides(options, FLAG_KEYS))
        data = load_dataset_dir(options['data'], run)
        result = train_loop(data, run.model, run.train)
        checkpoint_save(result.params, run, options['out'])
        last = result.history[-1]
        self.stdout.write(
            f"epochs={last.epoch} best_epoch={result.best_epoch} "
            f"best_loss={min(result.losses):.6f} stopped_early={result.stopped_early} "
            f"checkpoint={options['out']}"
        )
