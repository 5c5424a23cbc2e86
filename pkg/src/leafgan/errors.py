"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 2, everything else
raised at runtime -> 3.
"""


class ConfigError(Exception):
    """Invalid or missing configuration (bad key, bad range, missing path)."""


class NonFiniteLossError(RuntimeError):
    """A training loss became NaN/inf; carries a diagnostic message."""


class UnsupportedBackboneError(ValueError):
    """The classifier has no convolutional feature stage usable for CAMs."""
