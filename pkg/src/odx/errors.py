"""Exception types shared across the package."""


class OdxError(Exception):
    """Base class for all domain errors raised by this package."""


class ConfigurationError(OdxError):
    """Bad or incomplete configuration (missing columns, missing tables)."""


class DataError(OdxError):
    """Input data violates a precondition (unreadable file, empty pool)."""


class NormalizationError(OdxError):
    """A value could not be normalized (e.g. drug name empty after trimming)."""


class DomainError(OdxError):
    """Arguments outside an operation's mathematical domain."""


class SingularDesignError(OdxError):
    """Design matrix is rank deficient.

    ``columns`` names the offending (collinear) columns.
    """

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; collinear columns: {self.columns}")


class TrainingError(OdxError):
    """Model training cannot proceed (e.g. single-class labels)."""


class DivergenceError(TrainingError):
    """Loss became non-finite during gradient training."""

    def __init__(self, epoch, learning_rate):
        self.epoch = epoch
        self.learning_rate = learning_rate
        super().__init__(
            f"training loss diverged (NaN/inf) at epoch {epoch} with learning_rate={learning_rate}"
        )


class EncodingMismatchError(OdxError):
    """A feature vector does not match the model's training encoding.

    ``field`` carries the offending covariate name when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message)
