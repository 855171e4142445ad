"""Error taxonomy shared by the pipeline stages and the CLI exit-code map."""


class VqakitError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class ConfigError(VqakitError):
    """Bad configuration: unknown format tags, missing keys, invalid flags."""

    exit_code = 2


class DataError(VqakitError):
    """Unreadable inputs, schema violations, or invariant failures in data."""

    exit_code = 3


class ClientError(VqakitError):
    """Model endpoint failures that survived the retry budget."""

    exit_code = 4
