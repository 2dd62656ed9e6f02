"""Exception hierarchy shared across the toolkit."""


class ActiveNavError(Exception):
    """Base class for all toolkit errors."""


class GridError(ActiveNavError, ValueError):
    """Invalid grid dimensions or out-of-range grid indices."""


class FieldError(ActiveNavError, ValueError):
    """Invalid confidence-field parameters."""


class NetworkError(ActiveNavError, ValueError):
    """Invalid network shapes or hyperparameters."""


class EmptyDatasetError(ActiveNavError, ValueError):
    """A training operation received no records."""


class DataFormatError(ActiveNavError, ValueError):
    """A data file failed schema validation; message names the offending line."""


class ConfigError(ActiveNavError, ValueError):
    """A run configuration failed validation; message names the offending key."""


class NoValidPoseError(ActiveNavError, ValueError):
    """Initial-pose sampling found no grid pose below the threshold."""
