"""
LiteFat Errors
==============
One exception hierarchy for the whole app. Every class carries the process
exit status the CLI reports when it escapes a management command:

- 2: bad data, bad files, bad configuration, mismatched shapes
- 3: numeric failure (non-finite loss) or a broken training state

Most classes also derive from the matching builtin so callers that only
know Python's own exceptions still catch them.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class LiteFatError(Exception):
    """Base class for every error raised by the fatigue app."""

    exit_code = EXIT_DATA


class ShapeError(LiteFatError, ValueError):
    """Array or config dimensions do not chain."""


class FormatError(LiteFatError, ValueError):
    """A file or record does not follow its documented format."""


class InputError(LiteFatError, ValueError):
    """An argument is outside the domain of the operation."""


class ConfigError(LiteFatError, ValueError):
    """A configuration key is unknown or its value is invalid."""


class EmbeddingLookupError(LiteFatError, KeyError):
    """No embedding is available for a (clip, frame) key."""

    def __str__(self):
        # KeyError quotes its argument; keep the plain message.
        return str(self.args[0]) if self.args else ''


class StateError(LiteFatError, RuntimeError):
    """An object was used out of order (e.g. a forward trace reused)."""

    exit_code = EXIT_NUMERIC


class NumericError(LiteFatError, ArithmeticError):
    """A loss or parameter became non-finite."""

    exit_code = EXIT_NUMERIC


def describe_shape(array):
    """Render an array shape as ``3x4`` for error messages."""
    return 'x'.join(str(n) for n in getattr(array, 'shape', ()))
