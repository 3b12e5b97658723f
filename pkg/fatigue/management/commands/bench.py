"""
Efficiency benchmark for a model configuration.

Usage:
    python manage.py bench --config run.conf --batch 4 --iters 20 [--warmup 3] [--json]
"""

from django.conf import settings

from fatigue.bench import render_report, run_benchmark
from fatigue.config import load_run_config

from ._base import LiteFatCommand


class Command(LiteFatCommand):
    help = 'Measure parameter count, forward/backward time, throughput and peak memory.'

    def add_arguments(self, parser):
        self.add_config_arguments(parser)
        parser.add_argument('--batch', type=int, default=1, help='Clips per batch (default: %(default)s).')
        parser.add_argument('--iters', type=int, default=10, help='Timed iterations (default: %(default)s).')
        parser.add_argument('--warmup', type=int, default=settings.LITEFAT['BENCH_WARMUP'],
                            help='Untimed iterations (default: %(default)s).')
        parser.add_argument('--seed', type=int, default=0, help='Parameter and dummy-batch seed (default: %(default)s).')
        parser.add_argument('--json', action='store_true', help='Print the report as JSON.')

    def handle(self, *args, **options):
        run = load_run_config(options['config'], self.overrides(options))
        report = run_benchmark(
            run.model,
            batch_size=options['batch'],
            iterations=options['iters'],
            warmup=options['warmup'],
            seed=options['seed'],
        )
        self.stdout.write(render_report(report, 'json' if options['json'] else 'table'), ending='')
