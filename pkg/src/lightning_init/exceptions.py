"""Exception hierarchy shared by all modules."""


class LightningInitError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(LightningInitError, ValueError):
    """Invalid architecture, shapes or experiment configuration."""


class InputError(LightningInitError, ValueError):
    """Invalid data passed to an operation (non-finite values, empty sets...)."""


class NumericalError(LightningInitError, ArithmeticError):
    """Loss became NaN/inf during training.

    ``batch_index`` and ``epoch`` locate the failure when known.
    """

    def __init__(self, message, batch_index=None, epoch=None):
        super().__init__(message)
        self.batch_index = batch_index
        self.epoch = epoch


class IdxParseError(LightningInitError, ValueError):
    pass


class MagicMismatchError(IdxParseError):
    pass


class TruncatedDataError(IdxParseError):
    pass


class TrailingDataError(IdxParseError):
    pass


class LabelRangeError(IdxParseError):
    pass


class DatasetError(LightningInitError):
    """Base class for dataset acquisition failures."""


class OfflineError(DatasetError):
    pass


class DownloadError(DatasetError):
    pass


class ChecksumError(DatasetError):
    pass


class SchemaVersionError(LightningInitError):
    """A stored CSV/manifest was written with an incompatible schema."""
