"""
Finite-difference check of the hand-derived gradients.

Usage:
    python manage.py gradcheck [--tol 1e-4] [--seed 0]

Exits 0 when every tensor's relative error is below ``--tol``, 3 otherwise.
"""

from fatigue.config import ModelConfig, RunConfig, load_run_config
from fatigue.errors import NumericError
from fatigue.network import gradient_check

from ._base import LiteFatCommand

TINY_MODEL = ModelConfig(N=5, F=3, D=4, c=2, R=3, k=2, dilations=(1, 2), H=3, M=3, S=8)


class Command(LiteFatCommand):
    help = 'Compare analytic gradients with central finite differences on a tiny model.'

    def add_arguments(self, parser):
        parser.add_argument('--tol', type=float, default=1e-4, help='Largest accepted relative error (default: %(default)s).')
        parser.add_argument('--seed', type=int, default=0, help='Parameter and sample seed (default: %(default)s).')
        parser.add_argument('--step', type=float, default=1e-5, help='Finite-difference step h (default: %(default)s).')
        self.add_config_arguments(parser)

    def handle(self, *args, **options):
        run = load_run_config(options['config'], self.overrides(options), base=RunConfig(model=TINY_MODEL))
        errors = gradient_check(run.model, seed=options['seed'], h=options['step'])
        width = max(len(name) for name in errors)
        for name, error in errors.items():
            self.stdout.write(f'{name:<{width}}  {error:.3e}')
        worst = max(errors, key=errors.get)
        self.stdout.write(f'max {errors[worst]:.3e} ({worst})')
        failing = [name for name, error in errors.items() if not error < options['tol']]
        if failing:
            raise NumericError(f'{len(failing)} tensor(s) at or above tolerance {options["tol"]:g}: {", ".join(failing)}')
