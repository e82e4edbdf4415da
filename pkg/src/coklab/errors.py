"""Exception types shared across the package.

The CLI maps these to exit codes: validation errors exit 2, numerical
errors exit 3, resource-guard rejections exit 4.
"""


class CoklabError(Exception):
    pass


class ValidationError(CoklabError):
    """Bad parameters or malformed input."""


class NumericalError(CoklabError):
    """A series/elimination produced an internally inconsistent result."""


class ResourceGuardError(CoklabError):
    """Requested computation exceeds a configured size or work budget."""


class InstanceTooLargeError(ResourceGuardError):
    """A brute-force oracle was asked for an instance beyond its guard."""
