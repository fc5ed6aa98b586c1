"""Pipeline error taxonomy, one class per CLI exit code."""


class ConfigError(Exception):
    """Bad configuration: unknown key, unusable value, missing mandatory column."""

    exit_code = 2


class MissingInputError(Exception):
    """A stage was invoked before its upstream outputs exist."""

    exit_code = 3


class ConsistencyError(Exception):
    """On-disk artifacts disagree, e.g. a segment references an unknown port."""

    exit_code = 4
