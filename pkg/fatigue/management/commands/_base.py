"""
Shared plumbing for the LiteFat management commands.

- usage errors exit with status 1 (argparse's own default is 2)
- ``LiteFatError`` becomes ``CommandError`` carrying the error's exit status
- unreadable files are data errors (status 2)
- ``--config FILE`` and repeatable ``--set KEY=VALUE`` options
"""

import sys

from django.core.management.base import BaseCommand, CommandError, CommandParser
from rest_framework.renderers import JSONRenderer  # type: ignore

from fatigue.errors import EXIT_DATA, EXIT_USAGE, LiteFatError


class UsageParser(CommandParser):
    """CommandParser whose usage errors map to exit status 1."""

    def error(self, message):
        if self.called_from_command_line:
            self.print_usage(sys.stderr)
            self.exit(EXIT_USAGE, f'{self.prog}: error: {message}\n')
        raise CommandError(f'Error: {message}', returncode=EXIT_USAGE)


class LiteFatCommand(BaseCommand):
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.__class__ = UsageParser
        return parser

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except LiteFatError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code) from exc
        except OSError as exc:
            where = exc.filename or 'file'
            raise CommandError(f'{where}: {exc.strerror or exc}', returncode=EXIT_DATA) from exc

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------

    def add_config_arguments(self, parser):
        parser.add_argument('--config', metavar='FILE', help='Key-value run configuration file.')
        parser.add_argument(
            '--set', metavar='KEY=VALUE', action='append', default=[], dest='set_values',
            help='Override one configuration key, e.g. --set model.R=16 (repeatable).',
        )

    def overrides(self, options, flags=None):
        """
        Collect ``--set`` pairs plus dedicated flags into ``section.key -> value``.

        ``flags`` maps option names to configuration keys; options left at
        None are skipped. Dedicated flags win over ``--set``.
        """
        values = {}
        for item in options.get('set_values') or []:
            key, sep, value = item.partition('=')
            if not sep or not key.strip():
                raise CommandError(f'--set expects KEY=VALUE, got {item!r}', returncode=EXIT_USAGE)
            values[key.strip()] = value.strip()
        for option, key in (flags or {}).items():
            if options.get(option) is not None:
                values[key] = str(options[option])
        return values

    def write_json(self, payload):
        self.stdout.write(JSONRenderer().render(payload).decode('utf-8'))
