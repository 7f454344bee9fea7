"""Exception types. Each carries the CLI exit code it maps to."""


class SwsError(Exception):
    exit_code = 2


class ConfigError(SwsError):
    exit_code = 1


class DataError(SwsError):
    exit_code = 2


class DimensionError(DataError, ValueError):
    pass


class GraphError(DataError):
    pass


class PipelineError(DataError):
    """Building or scoring one image failed; the message names the image."""


class DegenerateMeasureError(SwsError):
    exit_code = 3
