"""Exception types shared across the package.

Two kinds of failure are distinguished because the CLI maps them to
different exit codes: bad input (files, parameters, misaligned data) and
violations of internal invariants that indicate a bug or corrupted state.
"""


class InputError(ValueError):
    """Invalid user input: bad file, bad parameter, inconsistent data."""


class InternalInvariantError(RuntimeError):
    """An internal consistency check failed; indicates a bug, not bad input."""
