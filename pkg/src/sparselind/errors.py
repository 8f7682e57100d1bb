"""Exception types shared across the package.

The CLI maps ``ValidationError`` to exit code 2 and ``InvariantError`` to
exit code 3.
"""


class ValidationError(ValueError):
    """Malformed or out-of-range input."""


class InvariantError(RuntimeError):
    """A numerical invariant failed; ``check`` names the failing check."""

    def __init__(self, check: str, message: str = ""):
        self.check = check
        super().__init__(f"{check}: {message}" if message else check)
