"""Exception hierarchy. The CLI maps each family to its own exit status."""


class IntdimError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(IntdimError, ValueError):
    """Invalid run configuration or command-line arguments."""


class DatasetError(IntdimError, ValueError):
    """A dataset could not be loaded or transformed."""


class FormatError(DatasetError):
    """A file does not conform to its declared container format."""


class KnnError(IntdimError, ValueError):
    """Nearest-neighbor search precondition violated (k too large, duplicate rows)."""


class EstimatorError(IntdimError, ValueError):
    """An estimator could not produce a finite positive dimension."""
