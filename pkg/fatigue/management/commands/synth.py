"""
Generate a synthetic landmark dataset directory.

Usage:
    python manage.py synth --out data/ --clips 30 --classes 3 --seed 7
"""

from fatigue.datadir import write_synthetic_dataset
from fatigue.errors import InputError

from ._base import LiteFatCommand


class Command(LiteFatCommand):
    help = 'Write landmarks.jsonl, embeddings.jsonl and manifest.json for a synthetic dataset.'

    def add_arguments(self, parser):
        parser.add_argument('--out', required=True, metavar='DIR', help='Output directory (created if missing).')
        parser.add_argument('--clips', type=int, default=30, help='Clips per class (default: %(default)s).')
        parser.add_argument('--classes', type=int, default=3, choices=(2, 3),
                            help='2 = normal/yawning, 3 = normal/yawning/talking (default: %(default)s).')
        parser.add_argument('--seed', type=int, default=0, help='Generation and split seed (default: %(default)s).')
        parser.add_argument('--frames', type=int, default=16, help='Frames per sample S (default: %(default)s).')
        parser.add_argument('--dim', type=int, default=64, help='Embedding dimension D (default: %(default)s).')
        parser.add_argument('--embedding-seed', type=int, default=None,
                            help='Seed of the synthetic embedding projection (default: --seed).')

    def handle(self, *args, **options):
        if options['frames'] < 1 or options['dim'] < 1:
            raise InputError('--frames and --dim must be >= 1')
        manifest = write_synthetic_dataset(
            options['out'],
            seed=options['seed'],
            clips_per_class=options['clips'],
            M=options['classes'],
            S=options['frames'],
            D=options['dim'],
            embedding_seed=options['embedding_seed'],
        )
        splits = manifest['splits']
        self.stdout.write(
            f"wrote {sum(len(v) for v in splits.values())} clips to {options['out']} "
            f"(train {len(splits['train'])}, validation {len(splits['validation'])}, test {len(splits['test'])})"
        )
